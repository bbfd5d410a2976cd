from hypothesis import settings

settings.register_profile("ellgw", max_examples=30, deadline=None)
settings.load_profile("ellgw")
