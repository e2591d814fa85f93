"""Central finite-difference checks for every backward kernel and for the
miniature two-stream network.

Everything here runs in float64. The finite-difference path only ever calls
forward functions, so it stays independent of the backward code it checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers as L
from .netgraph import Network, build_miniature_spec
from .weights import bias_name, weight_name

EPS = 1e-3
TOLERANCE = 1e-3
REL_FLOOR = 1e-6


def max_rel_error(analytic, numeric, floor: float = REL_FLOOR) -> float:
    """max |a - n| / max(|a|, |n|, floor) over all elements."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def numeric_grad(f, x: np.ndarray, eps: float = EPS) -> np.ndarray:
    """Central differences of scalar ``f()`` with respect to ``x`` (mutated
    and restored in place)."""
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


@dataclass
class CheckResult:
    name: str
    errors: list[float] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max(self.errors) if self.errors else 0.0

    def passed(self, tol: float = TOLERANCE) -> bool:
        return self.max_error < tol


def _dims(rng, lo=1, hi=5):
    return tuple(int(v) for v in rng.integers(lo, hi, size=2))


def check_conv(rng) -> float:
    n = 1
    c, o = (int(v) for v in rng.integers(1, 4, size=2))
    kh, kw = (int(v) for v in rng.integers(1, 4, size=2))
    sh, sw = (int(v) for v in rng.integers(1, 3, size=2))
    ph, pw = (int(v) for v in rng.integers(0, 2, size=2))
    h, w = kh + int(rng.integers(0, 4)), kw + int(rng.integers(0, 4))
    x = rng.standard_normal((n, c, h, w))
    p = L.ConvParams(rng.standard_normal((o, c, kh, kw)), rng.standard_normal(o), (sh, sw), (ph, pw))
    cot = rng.standard_normal(L.conv2d_forward(x, p).shape)
    f = lambda: float(np.sum(L.conv2d_forward(x, p) * cot))
    gx, gw, gb = L.conv2d_backward(x, p, cot)
    return max(
        max_rel_error(gx, numeric_grad(f, x)),
        max_rel_error(gw, numeric_grad(f, p.weights)),
        max_rel_error(gb, numeric_grad(f, p.bias)),
    )


def check_relu(rng) -> float:
    x = rng.standard_normal((1, 2, *_dims(rng, 2, 6)))
    # Keep samples away from the kink.
    x = np.where(np.abs(x) < 1e-2, np.sign(x + 1e-12) * (1e-2 + np.abs(x)), x)
    cot = rng.standard_normal(x.shape)
    f = lambda: float(np.sum(L.relu_forward(x) * cot))
    return max_rel_error(L.relu_backward(x, cot), numeric_grad(f, x))


def check_maxpool(rng) -> float:
    h, w = _dims(rng, 1, 8)
    c = int(rng.integers(1, 3))
    # Distinct values spaced well beyond 2*EPS so no perturbation flips an argmax.
    x = (rng.permutation(c * h * w).astype(np.float64) * 0.05).reshape(1, c, h, w)
    out, arg = L.maxpool_forward(x)
    cot = rng.standard_normal(out.shape)
    f = lambda: float(np.sum(L.maxpool_forward(x)[0] * cot))
    return max_rel_error(L.maxpool_backward(arg, cot, x.shape), numeric_grad(f, x))


def check_bilinear(rng) -> float:
    in_hw, out_hw = _dims(rng, 1, 9), _dims(rng, 1, 12)
    x = rng.standard_normal((1, 2, *in_hw))
    cot = rng.standard_normal((1, 2, *out_hw))
    f = lambda: float(np.sum(L.bilinear_resize_forward(x, out_hw) * cot))
    return max_rel_error(L.bilinear_resize_backward(cot, in_hw), numeric_grad(f, x))


def check_concat(rng) -> float:
    hw = _dims(rng, 1, 5)
    a = rng.standard_normal((1, int(rng.integers(1, 4)), *hw))
    b = rng.standard_normal((1, int(rng.integers(1, 4)), *hw))
    cot = rng.standard_normal((1, a.shape[1] + b.shape[1], *hw))
    f = lambda: float(np.sum(L.concat_channels(a, b) * cot))
    ga, gb = L.concat_backward(cot, [a.shape[1], b.shape[1]])
    return max(max_rel_error(ga, numeric_grad(f, a)), max_rel_error(gb, numeric_grad(f, b)))


def check_loss(rng) -> float:
    z = 2.0 * rng.standard_normal((1, 1, *_dims(rng, 1, 6)))
    t = rng.uniform(0, 1, z.shape)
    f = lambda: L.sigmoid_cross_entropy(z, t)[0]
    return max_rel_error(L.sigmoid_cross_entropy(z, t)[1], numeric_grad(f, z))


LAYER_CHECKS = {
    "conv": check_conv,
    "relu": check_relu,
    "maxpool": check_maxpool,
    "bilinear_resize": check_bilinear,
    "concat": check_concat,
    "sigmoid_cross_entropy": check_loss,
}


def run_layer_checks(seed: int = 0, instances: int = 20) -> dict[str, CheckResult]:
    rng = np.random.default_rng(seed)
    results = {}
    for name, fn in LAYER_CHECKS.items():
        res = CheckResult(name)
        for _ in range(instances):
            res.errors.append(fn(rng))
        results[name] = res
    return results


def random_network(spec, seed: int = 0, dtype=np.float64) -> Network:
    """Network with He-scaled Gaussian weights and small positive biases."""
    rng = np.random.default_rng(seed)
    net = Network(spec, dtype=dtype)
    for key, value in net.params.items():
        if value.ndim == 4:
            fan_in = value[0].size
            net.params[key] = rng.normal(0, np.sqrt(2.0 / fan_in), value.shape).astype(dtype)
        else:
            net.params[key] = rng.uniform(0.05, 0.15, value.shape).astype(dtype)
    return net


def random_inputs(spec, seed: int = 0, dtype=np.float64, binary_target: bool = True) -> dict:
    rng = np.random.default_rng([seed, 7])
    inputs = {}
    for blob, dims in spec.input_dims.items():
        if blob == "ground_truth":
            t = rng.uniform(0, 1, dims)
            inputs[blob] = (t > 0.7).astype(dtype) if binary_target else t.astype(dtype)
        else:
            inputs[blob] = rng.standard_normal(dims).astype(dtype)
    return inputs


def _activation_pattern(net) -> bytes:
    """ReLU sign masks and pool argmaxes of the last forward pass."""
    parts = []
    for lay in net.order:
        if lay.kind == "relu":
            parts.append(np.packbits(net.activations[lay.bottoms[0]] > 0).tobytes())
        elif lay.kind == "maxpool":
            parts.append(net._argmax[lay.name].tobytes())
    return b"".join(parts)


MIN_EPS = 1e-7


def numeric_grad_smooth(net, inputs, x: np.ndarray, eps: float = EPS):
    """Central differences of the network loss with respect to ``x``.

    A coordinate whose +/-eps perturbation changes a ReLU sign or a pool
    argmax straddles a kink, where the quotient is not a derivative
    estimate; its step is shrunk tenfold until the pattern is stable (down
    to ``MIN_EPS``). Returns ``(grad, steps, valid)``; ``valid`` is False
    only where no stable step was found.
    """
    net.forward(inputs)
    base = _activation_pattern(net)
    grad = np.zeros(x.shape, dtype=np.float64)
    steps = np.full(x.shape, eps, dtype=np.float64)
    valid = np.ones(x.shape, dtype=bool)
    flat, gflat, sflat, vflat = x.reshape(-1), grad.reshape(-1), steps.reshape(-1), valid.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        h = eps
        while True:
            flat[i] = orig + h
            net.forward(inputs)
            fp, pp = net.loss, _activation_pattern(net)
            flat[i] = orig - h
            net.forward(inputs)
            fm, pm = net.loss, _activation_pattern(net)
            flat[i] = orig
            stable = pp == base and pm == base
            if stable or h / 10 < MIN_EPS:
                break
            h /= 10
        gflat[i] = (fp - fm) / (2 * h)
        sflat[i] = h
        vflat[i] = stable
    return grad, steps, valid


@dataclass
class EndToEndResult:
    errors: dict[str, float]
    checked: int
    refined: int  # coordinates that needed a step below EPS
    unresolved: int

    @property
    def max_error(self) -> float:
        return max(self.errors.values())


def end_to_end(scale: str = "tiny", mode: str = "adjoint", seed: int = 0, eps: float = EPS,
               frozen=()) -> EndToEndResult:
    """Per-parameter max relative error of network backward versus finite
    differences of the network loss, on the miniature two-stream graph."""
    spec = build_miniature_spec("training", scale, frozen=frozen)
    net = random_network(spec, seed)
    net.interp_backward_mode = mode
    inputs = random_inputs(spec, seed)

    net.forward(inputs)
    net.backward()
    analytic = {k: v.copy() for k, v in net.gradients.items() if k in net.params}
    errors = {}
    checked = refined = unresolved = 0
    for key, g in analytic.items():
        numeric, steps, valid = numeric_grad_smooth(net, inputs, net.params[key], eps)
        checked += int(valid.sum())
        refined += int((steps < eps).sum())
        unresolved += int((~valid).sum())
        errors[key] = max_rel_error(g[valid], numeric[valid])
    return EndToEndResult(errors, checked, refined, unresolved)


def run_suite(scale: str = "tiny", mode: str = "adjoint", seed: int = 0, instances: int = 20) -> dict:
    """Layer checks plus the end-to-end check; in ``paper-resize`` mode the
    adjoint end-to-end error is computed alongside for comparison."""
    report = {"scale": scale, "mode": mode, "seed": seed, "tolerance": TOLERANCE}
    report["layers"] = {k: r.max_error for k, r in run_layer_checks(seed, instances).items()}
    e2e = end_to_end(scale, mode, seed)
    report["end_to_end"] = e2e.errors
    report["end_to_end_max"] = e2e.max_error
    report["coordinates"] = {"checked": e2e.checked, "refined_step": e2e.refined, "unresolved": e2e.unresolved}
    if mode != "adjoint":
        report["adjoint_end_to_end_max"] = end_to_end(scale, "adjoint", seed).max_error
    return report
