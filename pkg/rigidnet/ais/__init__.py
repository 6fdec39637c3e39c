from . import ais


__all__ = ["ais"]
