from . import localization_plotting, formation_plotting


__all__ = ["localization_plotting", "formation_plotting"]
