"""Block-structured priors: disjoint row or column ranges with their own denoiser."""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.core.exceptions import DimensionMismatchError, InvalidHyperParameterError
from app.denoisers.base import (
    DenoisedField,
    DenoiserKind,
    EntryDenoiser,
    PseudoObservationField,
    take_block,
)


@dataclass(frozen=True)
class Block:
    """Half-open range [start, stop) handled by ``denoiser``."""

    start: int
    stop: int
    denoiser: EntryDenoiser


class BlockCompositeDenoiser(EntryDenoiser):
    """
    Concatenation of per-block denoisers along ``axis`` ("rows" or "columns").

    The blocks must partition the axis exactly, in order.
    """

    kind = DenoiserKind.BLOCK_COMPOSITE

    def __init__(self, shape: Tuple[int, ...], axis: str, blocks: Sequence[Block]):
        super().__init__(shape)
        if axis not in ("rows", "columns"):
            raise InvalidHyperParameterError("axis", f"must be 'rows' or 'columns', got {axis!r}")
        if len(self.shape) != 2:
            raise DimensionMismatchError("block composite", "(rows, columns)", self.shape)
        self.axis = axis
        self.blocks: List[Block] = list(blocks)
        self._validate_partition()

    @property
    def _extent(self) -> int:
        return self.shape[0] if self.axis == "rows" else self.shape[1]

    def _block_shape(self, block: Block) -> Tuple[int, int]:
        width = block.stop - block.start
        return (width, self.shape[1]) if self.axis == "rows" else (self.shape[0], width)

    def _validate_partition(self) -> None:
        if not self.blocks:
            raise InvalidHyperParameterError("blocks", "at least one block is required")
        cursor = 0
        for block in self.blocks:
            if block.start != cursor:
                reason = "gap" if block.start > cursor else "overlap"
                raise InvalidHyperParameterError(
                    "blocks", f"{reason} at {self.axis[:-1]} {cursor} (block starts at {block.start})"
                )
            if block.stop <= block.start:
                raise InvalidHyperParameterError("blocks", f"empty block [{block.start}, {block.stop})")
            if block.denoiser.shape != self._block_shape(block):
                raise DimensionMismatchError(
                    f"block [{block.start}, {block.stop})", self._block_shape(block), block.denoiser.shape
                )
            cursor = block.stop
        if cursor != self._extent:
            raise InvalidHyperParameterError(
                "blocks", f"blocks cover {cursor} of {self._extent} {self.axis}"
            )

    def _posterior(self, q, v):
        concat_axis = 0 if self.axis == "rows" else 1
        means, variances = [], []
        for block in self.blocks:
            part_means, part_vars = block.denoiser._posterior(
                take_block(q, self.axis, block.start, block.stop),
                take_block(v, self.axis, block.start, block.stop),
            )
            means.append(part_means)
            variances.append(np.maximum(part_vars, 0.0))
        return np.concatenate(means, axis=concat_axis), np.concatenate(variances, axis=concat_axis)

    def gaussian_prior(self):
        parts = [block.denoiser.gaussian_prior() for block in self.blocks]
        if any(part is None for part in parts):
            return None
        concat_axis = 0 if self.axis == "rows" else 1
        return (
            np.concatenate([means for means, _ in parts], axis=concat_axis),
            np.concatenate([precisions for _, precisions in parts], axis=concat_axis),
        )

    def learn(self, field: PseudoObservationField, denoised: DenoisedField) -> None:
        for block in self.blocks:
            block.denoiser.learn(
                field.block(self.axis, block.start, block.stop),
                denoised.block(self.axis, block.start, block.stop),
            )

    def reset(self) -> None:
        for block in self.blocks:
            block.denoiser.reset()

    def __repr__(self) -> str:
        parts = ", ".join(f"[{b.start}:{b.stop}]={b.denoiser!r}" for b in self.blocks)
        return f"BlockCompositeDenoiser(shape={self.shape}, axis={self.axis}, {parts})"
