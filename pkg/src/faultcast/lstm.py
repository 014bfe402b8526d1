"""Single-layer LSTM cell: forward update and exact reverse-mode gradients.

The cell is small and fixed, so the gradients are written out by hand rather
than pulled from an autodiff framework; explicit formulas are what make the
finite-difference checks in the test suite meaningful.

Gate update for input x_t and previous state (h, c):

    f = sigmoid(w_f @ [h, x] + b_f)         forget gate
    i = sigmoid(w_i @ [h, x] + b_i)         input gate
    c~ = tanh(w_c @ [h, x] + b_c)           cell candidate
    c' = f * c + i * c~                     new cell state
    o = sigmoid(w_o @ [h, x] + b_o)         output gate
    h' = o * tanh(c')                       new hidden state

Every per-step signal accepts an optional leading batch dimension: x may be
(m,) or (batch, m) and h/c mirror it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .num import sigmoid

GATE_NAMES = ("w_f", "w_i", "w_c", "w_o", "b_f", "b_i", "b_c", "b_o")


@dataclass
class LstmParams:
    """Per-gate weight matrices, each (hidden, hidden + input), and biases."""

    w_f: np.ndarray
    w_i: np.ndarray
    w_c: np.ndarray
    w_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_f.shape[1] - self.w_f.shape[0]

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """(name, array) pairs in a fixed, documented order."""
        return [(name, getattr(self, name)) for name in GATE_NAMES]

    def copy(self) -> "LstmParams":
        return LstmParams(*(getattr(self, name).copy() for name in GATE_NAMES))


def param_count(hidden: int, inputs: int) -> int:
    """Number of scalar parameters: 4 * (hidden^2 + hidden*inputs + hidden)."""
    if hidden < 1 or inputs < 0:
        raise ValueError(f"invalid sizes: hidden={hidden}, inputs={inputs}")
    return 4 * (hidden * hidden + hidden * inputs + hidden)


def zeros_params(hidden: int, inputs: int) -> LstmParams:
    cols = hidden + inputs
    return LstmParams(
        *(np.zeros((hidden, cols)) for _ in range(4)),
        *(np.zeros(hidden) for _ in range(4)),
    )


def init_params(
    rng: np.random.Generator,
    hidden: int,
    inputs: int,
    scale_rule: str = "glorot",
    forget_bias: float = 1.0,
) -> LstmParams:
    """Sample initial parameters.

    "glorot" draws weights uniform on [-a, a] with a = sqrt(6 / (fan_in +
    fan_out)) = sqrt(6 / (hidden + inputs + hidden)); "small" uses a fixed
    [-0.1, 0.1]. The forget-gate bias starts at `forget_bias` (1 by default,
    standard practice for gradient flow over long sequences); other biases
    start at zero. Draw order is fixed so a seed pins every entry.
    """
    cols = hidden + inputs
    if scale_rule == "glorot":
        a = math.sqrt(6.0 / (hidden + inputs + hidden))
    elif scale_rule == "small":
        a = 0.1
    else:
        raise ValueError(f"unknown scale_rule: {scale_rule!r}")
    w = [rng.uniform(-a, a, size=(hidden, cols)) for _ in range(4)]
    return LstmParams(
        *w,
        np.full(hidden, float(forget_bias)),
        np.zeros(hidden),
        np.zeros(hidden),
        np.zeros(hidden),
    )


@dataclass
class StepCache:
    """Intermediates of one forward step, retained for the backward pass."""

    x_cat: np.ndarray  # [h_prev, x] concatenated, (..., hidden + input)
    f: np.ndarray
    i: np.ndarray
    c_cand: np.ndarray
    o_gate: np.ndarray
    c_prev: np.ndarray
    c_new: np.ndarray
    tanh_c: np.ndarray


@dataclass
class LstmGrads:
    """Gradients shaped like LstmParams, plus adjoints of the initial state
    and of every step input."""

    params: LstmParams
    dh0: np.ndarray
    dc0: np.ndarray
    dx: np.ndarray  # (steps, ..., input)


def lstm_step(
    params: LstmParams, h_prev: np.ndarray, c_prev: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, StepCache]:
    """One forward update; returns (h, c, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.input_size:
        raise ValueError(
            f"shape mismatch in lstm_step: input has length {x.shape[-1]}, "
            f"cell expects {params.input_size}"
        )
    x_cat = np.concatenate([h_prev, x], axis=-1)
    f = sigmoid(x_cat @ params.w_f.T + params.b_f)
    i = sigmoid(x_cat @ params.w_i.T + params.b_i)
    c_cand = np.tanh(x_cat @ params.w_c.T + params.b_c)
    c_new = f * c_prev + i * c_cand
    o_gate = sigmoid(x_cat @ params.w_o.T + params.b_o)
    tanh_c = np.tanh(c_new)
    h = o_gate * tanh_c
    cache = StepCache(x_cat, f, i, c_cand, o_gate, c_prev, c_new, tanh_c)
    return h, c_new, cache


def lstm_forward(
    params: LstmParams, h0: np.ndarray, c0: np.ndarray, xs
) -> tuple[np.ndarray, np.ndarray, list[StepCache]]:
    """Run the cell over a sequence of inputs.

    xs is (steps, ..., input); returns stacked hidden states (steps, ...,
    hidden), stacked cell states, and the caches. Empty xs yields empty
    stacks, leaving the state at (h0, c0).
    """
    h, c = np.asarray(h0, dtype=np.float64), np.asarray(c0, dtype=np.float64)
    hs, cs, caches = [], [], []
    for t, x in enumerate(xs):
        try:
            h, c, cache = lstm_step(params, h, c, x)
        except ValueError as exc:
            raise ValueError(f"step {t}: {exc}") from None
        hs.append(h)
        cs.append(c)
        caches.append(cache)
    if not hs:
        empty = np.zeros((0,) + h.shape)
        return empty, empty.copy(), caches
    return np.stack(hs), np.stack(cs), caches


def step_backward(
    params: LstmParams,
    cache: StepCache,
    dh: np.ndarray,
    dc: np.ndarray,
    grads: LstmParams,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reverse one step; accumulates parameter gradients into `grads`.

    dh and dc are the adjoints of this step's outputs (already merged with
    anything flowing back from later steps). Returns (dh_prev, dc_prev, dx).
    """
    hidden = params.hidden_size
    do = dh * cache.tanh_c
    dc_total = dc + dh * cache.o_gate * (1.0 - cache.tanh_c**2)
    df = dc_total * cache.c_prev
    di = dc_total * cache.c_cand
    dcand = dc_total * cache.i
    dc_prev = dc_total * cache.f

    # pre-activation adjoints
    da_f = df * cache.f * (1.0 - cache.f)
    da_i = di * cache.i * (1.0 - cache.i)
    da_c = dcand * (1.0 - cache.c_cand**2)
    da_o = do * cache.o_gate * (1.0 - cache.o_gate)

    # flatten any batch dimensions so the accumulation sums over them
    x_flat = cache.x_cat.reshape(-1, cache.x_cat.shape[-1])
    for gate, da in (("f", da_f), ("i", da_i), ("c", da_c), ("o", da_o)):
        da_flat = da.reshape(-1, hidden)
        getattr(grads, "w_" + gate)[...] += da_flat.T @ x_flat
        getattr(grads, "b_" + gate)[...] += da_flat.sum(axis=0)

    dx_cat = da_f @ params.w_f + da_i @ params.w_i + da_c @ params.w_c + da_o @ params.w_o
    return dx_cat[..., :hidden], dc_prev, dx_cat[..., hidden:]


def lstm_backward(
    params: LstmParams,
    caches: list[StepCache],
    dh_steps,
    dh_final: np.ndarray | None = None,
    dc_final: np.ndarray | None = None,
) -> LstmGrads:
    """Backpropagate through a forward run.

    dh_steps holds one adjoint per step's hidden output; dh_final/dc_final
    are optional extra adjoints on the final state. Gradients accumulate
    across time.
    """
    steps = len(caches)
    if len(dh_steps) != steps:
        raise ValueError(
            f"adjoint/tape length mismatch: {len(dh_steps)} adjoints for "
            f"{steps} cached steps"
        )
    grads = zeros_params(params.hidden_size, params.input_size)
    if steps == 0:
        zero = np.zeros(params.hidden_size)
        dh0 = zero if dh_final is None else np.asarray(dh_final, dtype=np.float64)
        dc0 = zero.copy() if dc_final is None else np.asarray(dc_final, dtype=np.float64)
        return LstmGrads(grads, dh0, dc0, np.zeros((0, params.input_size)))

    like = np.asarray(dh_steps[-1], dtype=np.float64)
    dh_carry = np.zeros_like(like) if dh_final is None else np.asarray(dh_final, dtype=np.float64)
    dc_carry = np.zeros_like(like) if dc_final is None else np.asarray(dc_final, dtype=np.float64)
    dxs = [None] * steps
    for t in range(steps - 1, -1, -1):
        dh_t = np.asarray(dh_steps[t], dtype=np.float64) + dh_carry
        dh_carry, dc_carry, dxs[t] = step_backward(params, caches[t], dh_t, dc_carry, grads)
    return LstmGrads(grads, dh_carry, dc_carry, np.stack(dxs))
