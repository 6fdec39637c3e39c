from . import localization


__all__ = ["localization"]
