"""Reverse sweep over recorded jet operations ("reverse-over-Taylor").

Operations are appended in execution order, which is already a topological
order, so the backward pass is a single reverse scan and a replay is a single
forward scan. Parameter leaves are order-0 jets mapped onto slices of the flat
parameter vector; their cotangents are scattered into a flat gradient.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from pinn_jets.taylor import Jet, JetFunction, unbroadcast
from shared.errors import UsageError

logger = logging.getLogger(__name__)


@dataclass
class _Entry:
    function: Optional[JetFunction]
    operands: Tuple[Jet, ...]
    offset: Optional[int] = None
    name: Optional[str] = None


class AdjointRecord:
    """Ordered list of recorded jet operations with one designated scalar output"""

    def __init__(self, n_params: int):
        self.n_params = n_params
        self._entries: List[_Entry] = []
        self._values: List[np.ndarray] = []
        self._output: Optional[Jet] = None
        # per-record cache of bound parameter leaves, keyed by the caller
        self.cache: Dict[Any, Any] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def leaf(self, value: np.ndarray, offset: int, name: Optional[str] = None) -> Jet:
        """Order-0 jet of a parameter block stored at ``offset`` of the flat vector"""
        value = np.asarray(value, dtype=np.float64)
        if offset < 0 or offset + value.size > self.n_params:
            raise UsageError(
                f"Parameter block '{name}' does not fit the flat vector",
                expected=self.n_params,
                actual=offset + value.size,
            )
        coeffs = value.reshape((1,) + value.shape).copy()
        self._entries.append(_Entry(None, (), offset=offset, name=name))
        self._values.append(coeffs)
        return Jet(coeffs, self, len(self._entries) - 1)

    def leaves(self) -> Iterator[Tuple[int, int, Optional[str]]]:
        """(node, offset, name) of every parameter leaf in recording order"""
        for index, entry in enumerate(self._entries):
            if entry.function is None:
                yield index, entry.offset, entry.name

    def push(self, function: JetFunction, operands: Sequence[Jet], out: np.ndarray) -> Jet:
        self._entries.append(_Entry(function, tuple(operands)))
        self._values.append(out)
        return Jet(out, self, len(self._entries) - 1)

    def set_output(self, output: Jet) -> None:
        if output.record is not self or output.node is None:
            raise UsageError("Output jet was not recorded on this record")
        if output.coeffs.size != 1:
            raise UsageError(
                "Designated output must be a scalar", expected=1, actual=output.coeffs.size
            )
        self._output = output

    @property
    def output(self) -> Optional[Jet]:
        return self._output

    def _operand_values(self, entry: _Entry, values: List[np.ndarray]) -> List[np.ndarray]:
        return [
            values[jet.node] if jet.record is self and jet.node is not None else jet.coeffs
            for jet in entry.operands
        ]

    def replay(self, leaf_values: Optional[np.ndarray] = None) -> np.ndarray:
        """Re-run every recorded operation and return the output coefficients.

        ``leaf_values`` optionally replaces the flat parameter vector the
        leaves were read from.
        """
        if self._output is None:
            raise UsageError("No output designated on the adjoint record")
        values: List[np.ndarray] = []
        for index, entry in enumerate(self._entries):
            if entry.function is None:
                if leaf_values is None:
                    values.append(self._values[index])
                else:
                    shape = self._values[index].shape
                    size = int(np.prod(shape))
                    block = leaf_values[entry.offset : entry.offset + size]
                    values.append(np.asarray(block, dtype=np.float64).reshape(shape).copy())
                continue
            values.append(entry.function.forward(*self._operand_values(entry, values)))
        return values[self._output.node]

    def backward(self) -> List[Optional[np.ndarray]]:
        """Cotangent of the designated output with respect to every recorded node"""
        if self._output is None:
            raise UsageError("No output designated on the adjoint record")
        grads: List[Optional[np.ndarray]] = [None] * len(self._entries)
        grads[self._output.node] = np.ones_like(self._values[self._output.node])
        for index in range(self._output.node, -1, -1):
            grad = grads[index]
            entry = self._entries[index]
            if grad is None or entry.function is None:
                continue
            inputs = self._operand_values(entry, self._values)
            operand_grads = entry.function.backward(grad, inputs, self._values[index])
            for jet, operand_grad in zip(entry.operands, operand_grads):
                if jet.record is not self or jet.node is None or operand_grad is None:
                    continue
                operand_grad = unbroadcast(operand_grad, jet.coeffs.shape)
                if grads[jet.node] is None:
                    grads[jet.node] = operand_grad
                else:
                    grads[jet.node] = grads[jet.node] + operand_grad
        return grads


def param_gradient(record: AdjointRecord) -> np.ndarray:
    """Flat gradient of the designated scalar output with respect to all parameters"""
    grads = record.backward()
    flat = np.zeros(record.n_params)
    for node, offset, _ in record.leaves():
        block = grads[node]
        if block is None:
            continue
        flat[offset : offset + block.size] += block.reshape(-1)
    return flat
