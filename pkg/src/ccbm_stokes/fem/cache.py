"""Per-space memo of the global matrices (keyed weakly by the space object)."""

import weakref

from .assembly import global_matrices

_CACHE = weakref.WeakKeyDictionary()


def matrices(spaces):
    mats = _CACHE.get(spaces)
    if mats is None:
        mats = global_matrices(spaces)
        _CACHE[spaces] = mats
    return mats
