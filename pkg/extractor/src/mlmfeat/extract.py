"""Masked-LM feature extraction.

For each input line: wrap it in the cloze template, run the model, and
record (a) the mean-pooled last-layer hidden state over non-padding
positions, (b) the per-label verbalizer probability distribution read from
the mask position's softmax, and (c) the argmax pseudo-label. Inference
only; no sampling, so extraction is deterministic for a fixed model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from mlmfeat.featfile import write_feature_file
from mlmfeat.template import Template, templify


@dataclass(frozen=True)
class ExtractionJob:
    inputs: str            # text file, one example per line
    template: Template
    verbalizer: str        # JSON file: label name -> list of words
    model: str             # model identifier or local path
    out: str
    max_length: int = 128
    batch_size: int = 32
    include_mask_in_pool: bool = True

    def __post_init__(self) -> None:
        if self.max_length < 4:
            raise ValueError("max_length must be at least 4")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass(frozen=True)
class ExtractionResult:
    records: int
    truncated: int
    label_names: tuple[str, ...]
    hidden_dim: int


def load_verbalizer(path: str | Path) -> dict[str, list[str]]:
    """Label name -> word list, in file order (which fixes the label order)."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict) or len(raw) < 2:
        raise ValueError("verbalizer must be a JSON object with at least two labels")
    seen: dict[str, str] = {}
    for label, words in raw.items():
        if not isinstance(words, list) or not words:
            raise ValueError(f"label {label!r} needs a non-empty word list")
        for word in words:
            if not isinstance(word, str) or not word:
                raise ValueError(f"label {label!r} has a non-string or empty word")
            if word in seen:
                raise ValueError(
                    f"word {word!r} appears under both {seen[word]!r} and {label!r}"
                )
            seen[word] = label
    return {label: list(words) for label, words in raw.items()}


def _verbalizer_token_ids(tokenizer, verbalizer: dict[str, list[str]]) -> list[list[int]]:
    """First sub-token id per word, grouped by label.

    Multi-token words are scored by their first sub-token's probability.
    Words that tokenize to the unknown token are rejected, as are words of
    different labels that collide on the same first sub-token (their scores
    would be indistinguishable).
    """
    owner: dict[int, tuple[str, str]] = {}
    grouped: list[list[int]] = []
    for label, words in verbalizer.items():
        ids = []
        for word in words:
            pieces = tokenizer(word, add_special_tokens=False)["input_ids"]
            if not pieces:
                raise ValueError(f"verbalizer word {word!r} tokenizes to nothing")
            first = int(pieces[0])
            if first == tokenizer.unk_token_id:
                raise ValueError(
                    f"verbalizer word {word!r} is not in the model vocabulary"
                )
            if first in owner and owner[first][0] != label:
                other_label, other_word = owner[first]
                raise ValueError(
                    f"verbalizer words {other_word!r} ({other_label}) and "
                    f"{word!r} ({label}) collide on the same first sub-token"
                )
            owner[first] = (label, word)
            ids.append(first)
        grouped.append(ids)
    return grouped


def _read_lines(path: str | Path) -> list[str]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"input file {path} is empty")
    return lines


def extract(job: ExtractionJob) -> ExtractionResult:
    from transformers import AutoModelForMaskedLM, AutoTokenizer

    texts = _read_lines(job.inputs)
    verbalizer = load_verbalizer(job.verbalizer)
    label_names = list(verbalizer.keys())

    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModelForMaskedLM.from_pretrained(job.model)
    model.eval()
    if tokenizer.mask_token_id is None:
        raise ValueError(f"model {job.model} has no mask token; cannot fill cloze templates")

    word_ids = _verbalizer_token_ids(tokenizer, verbalizer)
    flat_ids = torch.tensor([i for ids in word_ids for i in ids])
    group_of = np.repeat(np.arange(len(word_ids)), [len(ids) for ids in word_ids])

    cloze = [templify(t, job.template, tokenizer.mask_token) for t in texts]
    truncated = sum(
        len(ids) > job.max_length
        for ids in tokenizer(cloze, add_special_tokens=True)["input_ids"]
    )

    h_last_rows: list[np.ndarray] = []
    h_verb_rows: list[np.ndarray] = []
    for start in range(0, len(cloze), job.batch_size):
        batch = cloze[start : start + job.batch_size]
        enc = tokenizer(
            batch,
            padding=True,
            truncation=True,
            max_length=job.max_length,
            return_tensors="pt",
        )
        with torch.no_grad():
            out = model(**enc, output_hidden_states=True)
        hidden = out.hidden_states[-1]
        is_mask = enc["input_ids"] == tokenizer.mask_token_id

        for row in range(len(batch)):
            positions = torch.nonzero(is_mask[row]).flatten()
            if len(positions) != 1:
                raise ValueError(
                    f"record {start + row}: expected exactly one mask token, "
                    f"found {len(positions)} (raise --max-len if truncation cut it off)"
                )
            pool = enc["attention_mask"][row].bool()
            if not job.include_mask_in_pool:
                pool = pool & ~is_mask[row]
            h_last_rows.append(
                hidden[row][pool].mean(dim=0).to(torch.float64).numpy()
            )

            probs = torch.softmax(out.logits[row, positions[0]].to(torch.float64), dim=-1)
            word_probs = probs[flat_ids].numpy()
            total = word_probs.sum()
            if total <= 0:
                raise ValueError(f"record {start + row}: zero verbalizer mass")
            per_label = np.bincount(
                group_of, weights=word_probs, minlength=len(label_names)
            )
            h_verb_rows.append(per_label / total)

    h_last = np.stack(h_last_rows)
    h_verb = np.stack(h_verb_rows)
    pseudo = np.argmax(h_verb, axis=1)
    write_feature_file(
        job.out,
        ids=np.arange(len(texts), dtype=np.int64),
        h_last=h_last,
        h_verb=h_verb,
        pseudo_labels=pseudo,
        label_names=label_names,
    )
    return ExtractionResult(
        records=len(texts),
        truncated=int(truncated),
        label_names=tuple(label_names),
        hidden_dim=int(h_last.shape[1]),
    )
