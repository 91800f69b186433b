"""
ホモトピー群のカタログと積の分解

積多様体 E = M × F では π_m(E) ≅ π_m(M) ⊕ π_m(F)（m = 1 では直積）。
カタログの多様体 id は ``R1``..``R4``（``interval`` は ``R1`` の別名）、``S1``、``S2``、``S3``、``T2``。
``"S2 x S1"`` のような積の id は再帰的に分解して引く。
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from modules.errors import LevelOutOfRange, ManifestError, UnknownManifold

from .groups import (
    GroupExpr,
    cyclic,
    direct_product,
    direct_sum,
    free_abelian,
    normalize,
    parse_group,
    trivial,
)

logger = logging.getLogger(__name__)

M_MAX = 4

ALIASES = {"interval": "R1", "line": "R1", "circle": "S1", "torus2": "T2", "sphere2": "S2"}


@dataclass(frozen=True)
class CatalogEntry:
    """1 つの多様体の π_1..π_m_max"""

    manifold_id: str
    groups: tuple
    source: str = ""

    @property
    def m_max(self) -> int:
        return len(self.groups)

    def to_dict(self) -> dict:
        return {
            "id": self.manifold_id,
            "groups": [g.to_dict() for g in self.groups],
            "source": self.source,
        }


def _standard_entries() -> dict:
    Z, Z2, O = free_abelian(1), cyclic(2), trivial()
    entries = [
        CatalogEntry(f"R{n}", (O, O, O, O), "contractible") for n in range(1, 5)
    ] + [
        CatalogEntry("S1", (Z, O, O, O), "universal cover is the line"),
        CatalogEntry("S2", (O, Z, Z, Z2), "Hopf fibration; pi4(S2) = pi4(S3)"),
        CatalogEntry("S3", (O, O, Z, Z2), "Freudenthal suspension; pi4(S3) = Z_2"),
        CatalogEntry("T2", (free_abelian(2), O, O, O), "S1 x S1, aspherical"),
    ]
    return {e.manifold_id: e for e in entries}


@dataclass
class HomotopyCatalog:
    """多様体 id → CatalogEntry の表

    Attributes:
        entries: 登録済みの多様体
    """

    entries: dict = field(default_factory=_standard_entries)

    def register(self, manifold_id: str, groups: Sequence, source: str = "user") -> CatalogEntry:
        """マニフェストの利用者エントリを登録する

        Args:
            manifold_id: 多様体 id（``x`` を含まない）
            groups: π_1, π_2, ... の表記（文字列または GroupExpr）
            source: 出典メモ

        Raises:
            ManifestError: id や群の表記が不正、または m ≥ 2 に非可換な群がある
        """
        if not manifold_id or " x " in manifold_id:
            raise ManifestError(f"invalid manifold id for homotopy entry: {manifold_id!r}")
        if not groups:
            raise ManifestError(f"homotopy entry {manifold_id} has no groups")
        parsed = []
        for m, g in enumerate(groups, start=1):
            expr = normalize(g) if isinstance(g, GroupExpr) else parse_group(g)
            if m >= 2 and not expr.is_abelian:
                raise ManifestError(f"pi_{m}({manifold_id}) must be abelian, got {expr}")
            parsed.append(expr)
        entry = CatalogEntry(manifold_id, tuple(parsed), source)
        if manifold_id in self.entries:
            logger.warning(f"Homotopy entry {manifold_id} replaced")
        self.entries[manifold_id] = entry
        logger.debug(f"Homotopy entry registered: {manifold_id} ({entry.m_max} levels)")
        return entry

    def resolve(self, manifold_id: str) -> str:
        key = manifold_id.strip()
        return ALIASES.get(key, key)

    def group(self, manifold_id: str, m: int) -> GroupExpr:
        """π_m を引く。積の id は分解規則で組み立てる

        Raises:
            UnknownManifold: カタログにない id
            LevelOutOfRange: m がエントリの範囲外
        """
        factors = manifold_id.split(" x ")
        if len(factors) > 1:
            return _combine([self.group(part, m) for part in factors], m)
        key = self.resolve(manifold_id)
        entry = self.entries.get(key)
        if entry is None:
            raise UnknownManifold(f"manifold {manifold_id!r} is not in the homotopy catalog", manifold=manifold_id)
        if not 1 <= m <= entry.m_max:
            raise LevelOutOfRange(
                f"pi_{m}({manifold_id}) is outside the catalog range 1..{entry.m_max}",
                manifold=manifold_id,
                level=m,
            )
        return entry.groups[m - 1]

    def table(self, m_max: int = M_MAX) -> dict:
        """HomotopyTable: 多様体 id → [π_1, ..., π_m_max]"""
        return {key: [self.group(key, m) for m in range(1, m_max + 1)] for key in sorted(self.entries)}


DEFAULT_CATALOG = HomotopyCatalog()


def _combine(groups: list, m: int) -> GroupExpr:
    if m == 1:
        return normalize(direct_product(*groups))
    return normalize(direct_sum(*groups))


def split_product(
    manifold_id: str, fiber_id: str, m: int, catalog: Optional[HomotopyCatalog] = None
) -> GroupExpr:
    """π_m(M × F) ≅ π_m(M) ⊕ π_m(F)

    m = 1 では直積（どちらかが非可換なら ``direct_product`` のまま残る）。

    Raises:
        UnknownManifold: M または F がカタログにない
        LevelOutOfRange: m が範囲外
    """
    catalog = catalog or DEFAULT_CATALOG
    result = _combine([catalog.group(manifold_id, m), catalog.group(fiber_id, m)], m)
    logger.debug(f"pi_{m}({manifold_id} x {fiber_id}) = {result}")
    return result


def product_table(
    ids: Iterable[str], m_max: int = M_MAX, catalog: Optional[HomotopyCatalog] = None
) -> dict:
    """id（積の id を含む）ごとの [π_1, ..., π_m_max]"""
    catalog = catalog or DEFAULT_CATALOG
    return {manifold_id: [catalog.group(manifold_id, m) for m in range(1, m_max + 1)] for manifold_id in ids}
