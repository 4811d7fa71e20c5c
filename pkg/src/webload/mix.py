"""Weighted object mixes and the page-to-object map."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import InvalidParameterError


@dataclass(frozen=True)
class MixEntry:
    object_name: str
    path: str
    weight: int


@dataclass(frozen=True)
class PageEntry:
    page_name: str
    object_names: tuple[str, ...]


@dataclass(frozen=True)
class ObjectMix:
    entries: tuple[MixEntry, ...]
    page_map: tuple[PageEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "page_map", tuple(
            PageEntry(p.page_name, tuple(p.object_names)) for p in self.page_map
        ))
        if not self.entries:
            raise InvalidParameterError("a mix needs at least one object")
        names = [e.object_name for e in self.entries]
        if len(set(names)) != len(names):
            raise InvalidParameterError("object names must be unique")
        for e in self.entries:
            if int(e.weight) != e.weight or e.weight < 1:
                raise InvalidParameterError(f"weight of {e.object_name!r} must be a positive integer")
        known = set(names)
        for page in self.page_map:
            if not page.object_names:
                raise InvalidParameterError(f"page {page.page_name!r} lists no objects")
            missing = [o for o in page.object_names if o not in known]
            if missing:
                raise InvalidParameterError(f"page {page.page_name!r} refers to unknown objects {missing}")

    def weight_of(self, object_name: str) -> int:
        for e in self.entries:
            if e.object_name == object_name:
                return e.weight
        raise KeyError(object_name)

    @property
    def object_instance_count(self) -> int:
        return sum(e.weight for e in self.entries)

    @property
    def page_count(self) -> int:
        """Page instances in one pass of the script.

        A page occurs as often as its first (document) object does. Without a
        page map every object is its own page.
        """
        if not self.page_map:
            return self.object_instance_count
        return sum(self.weight_of(p.object_names[0]) for p in self.page_map)

    @property
    def page_object_ratio(self) -> float:
        return self.page_count / self.object_instance_count

    @property
    def probabilities(self) -> np.ndarray:
        w = np.array([e.weight for e in self.entries], dtype=float)
        return w / w.sum()

    def select(self, rng: np.random.Generator) -> MixEntry:
        return self.entries[int(rng.choice(len(self.entries), p=self.probabilities))]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Indices into ``entries`` for ``size`` independent selections."""
        return rng.choice(len(self.entries), size=size, p=self.probabilities)

    def to_dict(self) -> dict:
        return {
            "entries": [{"object_name": e.object_name, "path": e.path, "weight": e.weight} for e in self.entries],
            "page_map": [{"page_name": p.page_name, "object_names": list(p.object_names)} for p in self.page_map],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ObjectMix":
        try:
            entries = [
                MixEntry(e["object_name"], e.get("path", "/" + e["object_name"]), int(e.get("weight", 1)))
                for e in doc["entries"]
            ]
            pages = [PageEntry(p["page_name"], tuple(p["object_names"])) for p in doc.get("page_map", [])]
        except (KeyError, TypeError) as exc:
            raise InvalidParameterError(f"malformed mix document: {exc}") from exc
        return cls(tuple(entries), tuple(pages))


def load_mix(path: str | Path) -> ObjectMix:
    return ObjectMix.from_dict(json.loads(Path(path).read_text()))


def save_mix(mix: ObjectMix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(mix.to_dict(), indent=2) + "\n")


def single_object_mix(name: str = "home") -> ObjectMix:
    return ObjectMix((MixEntry(name, "/" + name, 1),))


def webgov_mix() -> ObjectMix:
    """Six-object case-study site: 15 object instances making up 9 page instances.

    4 Home pages (2 objects each), 2 Department pages (2 objects each),
    2 Demographics and 1 Statistics page (1 object each).
    """
    weights = [
        ("010_Home", 4), ("012_Home_jpg", 4), ("020_Dept", 2),
        ("022_Dept_jpg", 2), ("030_Demographics", 2), ("040_Statistics", 1),
    ]
    entries = tuple(MixEntry(name, "/" + name, w) for name, w in weights)
    pages = (
        PageEntry("Home", ("010_Home", "012_Home_jpg")),
        PageEntry("Department", ("020_Dept", "022_Dept_jpg")),
        PageEntry("Demographics", ("030_Demographics",)),
        PageEntry("Statistics", ("040_Statistics",)),
    )
    return ObjectMix(entries, pages)
