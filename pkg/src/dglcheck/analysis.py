"""Static checks on a candidate model: assumption spine and anti-stasis."""

from __future__ import annotations

from dataclasses import dataclass

from . import ir
from .ir import TRUE, And, Box, Diamond, Imply, TrueF


class ShapeError(ValueError):
    """The formula is not ``A1 -> (A2 -> ... -> <game> goal)``."""


class StasisError(ValueError):
    def __init__(self, written, min_writes):
        self.written = frozenset(written)
        self.min_writes = min_writes
        names = ", ".join(sorted(self.written)) or "none"
        super().__init__(
            f"the game writes {len(self.written)} variable(s) ({names}); "
            f"at least {min_writes} must change"
        )


SHAPE_MESSAGE = "model is not of shape assumptions -> <game> goal"


@dataclass(frozen=True)
class SplitModel:
    assumptions: ir.Formula
    modality: ir.Formula  # Diamond or Box
    parts: tuple = ()  # the individual antecedents, outermost first

    @property
    def game(self) -> ir.Game:
        return self.modality.game

    @property
    def angel(self) -> bool:
        return isinstance(self.modality, Diamond)

    def reassemble(self) -> ir.Formula:
        out = self.modality
        for a in reversed(self.parts):
            out = Imply(a, out)
        return out


def split_assumptions(f: ir.Formula) -> SplitModel:
    parts = []
    node = f
    while isinstance(node, Imply):
        if not ir.is_modality_free(node.left):
            raise ShapeError(SHAPE_MESSAGE + " (an assumption contains a modality)")
        parts.append(node.left)
        node = node.right
    if not isinstance(node, (Diamond, Box)):
        raise ShapeError(SHAPE_MESSAGE)
    if not ir.is_modality_free(node.post):
        raise ShapeError(SHAPE_MESSAGE + " (the goal contains a nested modality)")
    assumptions = TRUE
    for p in parts:
        assumptions = p if isinstance(assumptions, TrueF) else And(assumptions, p)
    return SplitModel(assumptions, node, tuple(parts))


def stasis_check(game: ir.Game, min_writes: int) -> frozenset:
    """Return the written variables, or raise StasisError if there are too few."""
    written = ir.written_vars(game)
    if len(written) < min_writes:
        raise StasisError(written, min_writes)
    return written
