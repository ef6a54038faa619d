from hypothesis import settings

settings.register_profile("dev", deadline=None, max_examples=50)
settings.load_profile("dev")
