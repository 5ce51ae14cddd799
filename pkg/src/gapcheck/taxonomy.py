"""Gap category tree, multi-hot label sets, and the acceptability rule.

A "gap" is any dissimilarity between a machine-generated legal analysis and
the human-written one. Gaps are classified into a tree of categories. The
second level of the tree -- no gaps (0), intrinsic gaps (1), target mismatch
(2), citation content mismatch (3) -- is the label vocabulary used everywhere
else in this package: annotations, detector outputs, and metrics all speak in
subsets of {0, 1, 2, 3}.

Leaf categories (5-14) are representable here for reference and for rendering
instructions, but are never produced by the detector and never required in
annotations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

NO_GAPS = 0
INTRINSIC = 1
TARGET_MISMATCH = 2
CITATION_CONTENT_MISMATCH = 3

#: The label vocabulary: second-level category ids, in vector order.
LABEL_IDS = (NO_GAPS, INTRINSIC, TARGET_MISMATCH, CITATION_CONTENT_MISMATCH)

#: Reserved id for the internal node grouping categories 2 and 3. Never a
#: valid label and never returned by :func:`category_info`.
EXTRINSIC_GROUP_ID = 4


class LabelError(ValueError):
    """A raw label list violates the label-set constraints."""


class UnknownCategoryError(KeyError):
    """No gap category exists with the requested id."""


@dataclass(frozen=True)
class GapCategory:
    """One node of the gap category tree."""

    id: int
    name: str
    parent: int | None
    tier: str  # "root-level" | "second-level" | "leaf"
    branch: str  # "none" | "intrinsic" | "extrinsic"
    is_hallucination: bool


def _build_tree() -> dict[int, GapCategory]:
    second = [
        (NO_GAPS, "no gaps", None, "none", False),
        (INTRINSIC, "intrinsic gaps", None, "intrinsic", True),
        (TARGET_MISMATCH, "target mismatch", EXTRINSIC_GROUP_ID, "extrinsic", False),
        (CITATION_CONTENT_MISMATCH, "citation content mismatch", EXTRINSIC_GROUP_ID, "extrinsic", True),
    ]
    leaves = [
        (5, "redundancy", INTRINSIC),
        (6, "citation format mismatch", INTRINSIC),
        (7, "stylistic mismatch", INTRINSIC),
        (8, "structural mismatch", INTRINSIC),
        (9, "claim hallucination", CITATION_CONTENT_MISMATCH),
        (10, "citation hallucination", CITATION_CONTENT_MISMATCH),
        (11, "retrieval inaccuracy", CITATION_CONTENT_MISMATCH),
        (12, "chain vs. parallel", TARGET_MISMATCH),
        (13, "agree vs. disagree", TARGET_MISMATCH),
        (14, "compound cite", TARGET_MISMATCH),
    ]
    tree: dict[int, GapCategory] = {
        EXTRINSIC_GROUP_ID: GapCategory(
            id=EXTRINSIC_GROUP_ID,
            name="extrinsic gaps",
            parent=None,
            tier="root-level",
            branch="extrinsic",
            is_hallucination=False,
        )
    }
    for cid, name, parent, branch, halu in second:
        tree[cid] = GapCategory(cid, name, parent, "second-level", branch, halu)
    for cid, name, parent in leaves:
        p = tree[parent]
        tree[cid] = GapCategory(cid, name, parent, "leaf", p.branch, p.is_hallucination)
    return tree


#: Every node of the tree, including the internal extrinsic grouping node.
#: Parents of None hang off a single virtual root.
ALL_CATEGORIES: dict[int, GapCategory] = _build_tree()

#: The categories addressable by id (the grouping node is excluded: its id is
#: reserved, not part of the published numbering).
CATEGORIES: dict[int, GapCategory] = {
    cid: cat for cid, cat in ALL_CATEGORIES.items() if cid != EXTRINSIC_GROUP_ID
}


def category_info(category_id: int) -> GapCategory:
    """Return the descriptor for a category id (0-14, excluding reserved 4)."""
    try:
        return CATEGORIES[category_id]
    except KeyError:
        raise UnknownCategoryError(f"unknown gap category id: {category_id}") from None


@dataclass(frozen=True)
class GapLabelSet:
    """A validated multi-hot label over (no gaps, intrinsic, target mismatch,
    citation content mismatch).

    At least one label is always set, and "no gaps" is mutually exclusive
    with every gap label. Build instances with :func:`parse_label_list` or
    :meth:`from_ints`; the constructor assumes ``bits`` already satisfies the
    constraints.
    """

    bits: tuple[int, int, int, int]

    @classmethod
    def from_ints(cls, labels: Iterable[int]) -> GapLabelSet:
        return parse_label_list(list(labels))

    def __contains__(self, label: int) -> bool:
        return label in LABEL_IDS and bool(self.bits[label])

    def __iter__(self) -> Iterator[int]:
        return (i for i in LABEL_IDS if self.bits[i])

    def to_list(self) -> list[int]:
        """Sorted integer labels, the canonical list form."""
        return [i for i in LABEL_IDS if self.bits[i]]

    def to_json(self) -> str:
        """Canonical JSON form: a compact sorted integer array, e.g. ``[1,3]``."""
        return json.dumps(self.to_list(), separators=(",", ":"))

    @property
    def has_gap(self) -> bool:
        """True when any gap label (1, 2, or 3) is set."""
        return bool(self.bits[1] or self.bits[2] or self.bits[3])

    @property
    def has_hallucination(self) -> bool:
        """True when an intrinsic gap or citation content mismatch is set."""
        return bool(self.bits[1] or self.bits[3])

    def __str__(self) -> str:
        return self.to_json()


def parse_label_list(raw: Sequence[int]) -> GapLabelSet:
    """Validate a raw integer label list and collapse it to a label set.

    Duplicates collapse silently; anything else off-contract is an error:
    empty lists, non-integers, labels outside 0-3, and 0 co-occurring with a
    gap label are all rejected rather than repaired.
    """
    if not isinstance(raw, (list, tuple)):
        raise LabelError(f"label list must be a list of integers, got {type(raw).__name__}")
    if len(raw) == 0:
        raise LabelError("label list is empty; at least one label is required")
    seen: set[int] = set()
    for item in raw:
        if isinstance(item, bool) or not isinstance(item, int):
            raise LabelError(f"labels must be integers, got {item!r}")
        if item not in LABEL_IDS:
            raise LabelError(f"label {item} outside the valid range 0-3")
        seen.add(item)
    if NO_GAPS in seen and len(seen) > 1:
        others = sorted(seen - {NO_GAPS})
        raise LabelError(
            f"exclusivity violation: label 0 (no gaps) cannot co-occur with gap labels {others}"
        )
    bits = tuple(1 if i in seen else 0 for i in LABEL_IDS)
    return GapLabelSet(bits)  # type: ignore[arg-type]


def is_acceptable(labels: GapLabelSet) -> bool:
    """Whether a generation with these gap labels counts as acceptable.

    A generation is acceptable when it has no gaps at all, or when its only
    gap is a target mismatch. Any intrinsic gap or citation content mismatch
    makes it unacceptable.
    """
    return not (INTRINSIC in labels or CITATION_CONTENT_MISMATCH in labels)


def all_valid_label_sets() -> list[GapLabelSet]:
    """Enumerate the 8 valid label sets: {0} plus every non-empty subset of {1,2,3}."""
    sets = [parse_label_list([NO_GAPS])]
    gap_ids = (INTRINSIC, TARGET_MISMATCH, CITATION_CONTENT_MISMATCH)
    for mask in range(1, 8):
        labels = [gap_ids[i] for i in range(3) if mask >> i & 1]
        sets.append(parse_label_list(labels))
    return sets
