"""Sinusoidal representation network fitted to pressure-gradient samples.

The network maps physical coordinates x to a scalar Phi(x):

    a_1     = sin(omega0 * W_0 x + b_0)
    a_{l+1} = sin(omega_hidden * W_l a_l + b_l),   l = 1..hidden_layers
    Phi     = W_out a_{L+1} + b_out

Training matches grad_x Phi to the sampled pressure gradient, so the fitted
Phi is the pressure up to an additive constant. The input gradient is
propagated forward as two tangent streams (d/dx, d/dy) alongside the primal
pass, and parameter gradients come from a hand-written reverse pass through
both streams. Everything is float64 numpy.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DivergenceError, EmptyFieldError
from .fields import PointSet2, ScalarSamples, VectorSamples
from .synthlab import philox


@dataclass(frozen=True)
class SirenConfig:
    hidden_layers: int = 1
    width: int = 64
    omega0: float = 20.0
    omega_hidden: float = 30.0
    rng_seed: int = 0
    init: str = "omega"  # "omega": deeper bounds divided by omega_hidden; "literal": plain sqrt(6/n)

    def __post_init__(self):
        if self.init not in ("omega", "literal"):
            raise ValueError(f"unknown init rule {self.init!r}")
        if self.hidden_layers < 1 or self.width < 1:
            raise ValueError("need at least one hidden layer of width >= 1")
        if not (self.omega0 > 0 and self.omega_hidden > 0):
            raise ValueError("frequency scales must be positive")

    @classmethod
    def from_arch(cls, arch: str, omega0, omega_hidden, rng_seed=0, init="omega"):
        """Parse labels like ``"1x64"`` (hidden layers x width)."""
        layers, width = arch.lower().split("x")
        return cls(int(layers), int(width), float(omega0), float(omega_hidden), int(rng_seed), init)

    @property
    def arch(self):
        return f"{self.hidden_layers}x{self.width}"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-5
    epochs: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0 or self.epochs < 1:
            raise ValueError("learning_rate must be > 0 and epochs >= 1")


@dataclass
class SirenParams:
    """Weights ``W[i]`` (out x in) and biases ``b[i]``; the last pair is the output layer."""

    W: list
    b: list

    def flat(self):
        return np.concatenate([a.ravel() for pair in zip(self.W, self.b) for a in pair])

    def copy(self):
        return SirenParams([w.copy() for w in self.W], [v.copy() for v in self.b])

    def arrays(self):
        for w, v in zip(self.W, self.b):
            yield w
            yield v

    @classmethod
    def from_flat(cls, flat, like: "SirenParams"):
        out, k = [], 0
        for a in like.arrays():
            out.append(np.asarray(flat[k:k + a.size], float).reshape(a.shape))
            k += a.size
        return cls(out[0::2], out[1::2])


@dataclass
class SirenModel:
    config: SirenConfig
    params: SirenParams
    loss_history: list = field(default_factory=list)
    hull: np.ndarray = None  # training-point convex hull vertices, ccw

    def to_json(self):
        return {
            "config": asdict(self.config),
            "shapes": [list(a.shape) for a in self.params.arrays()],
            "params": self.params.flat().tolist(),
            "loss_history": [float(v) for v in self.loss_history],
            "hull": None if self.hull is None else self.hull.tolist(),
        }

    @classmethod
    def from_json(cls, d):
        cfg = SirenConfig(**d["config"])
        like = init_siren(cfg)
        params = SirenParams.from_flat(np.asarray(d["params"], float), like)
        hull = None if d.get("hull") is None else np.asarray(d["hull"], float)
        return cls(cfg, params, list(d.get("loss_history", [])), hull)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def init_siren(config: SirenConfig) -> SirenParams:
    """Uniform weight init: +-1/n on the input layer, +-sqrt(6/n) beyond it.

    ``n`` is the fan-in of the layer; biases start at zero. With the default
    ``init="omega"`` the deeper bounds are divided by ``omega_hidden`` so that
    ``omega_hidden * W`` has the +-sqrt(6/n) spread; without it the hidden
    pre-activations span dozens of periods and training stalls.
    """
    rng = philox(config.rng_seed)
    sizes = [2] + [config.width] * (config.hidden_layers + 1) + [1]
    W, b = [], []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / n_in if i == 0 else math.sqrt(6.0 / n_in)
        if i > 0 and config.init == "omega":
            bound /= config.omega_hidden
        W.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        b.append(np.zeros(n_out))
    return SirenParams(W, b)


def omega0_heuristic(Lx, Ly, c=2.0):
    if not (Lx > 0 and Ly > 0):
        raise ValueError("domain extents must be positive")
    return c * 2.0 * math.pi / max(Lx, Ly)


def _omegas(config, n_sine):
    return [config.omega0] + [config.omega_hidden] * (n_sine - 1)


def _forward(params, X, config, keep=False):
    """Primal and tangent pass. Returns Phi (N,), grad (N, 2) and the tape."""
    X = np.atleast_2d(np.asarray(X, float))
    n_sine = len(params.W) - 1
    om = _omegas(config, n_sine)
    a = X
    T = None  # tangents, shape (2, N, width)
    tape = []
    for l in range(n_sine):
        W, b = params.W[l], params.b[l]
        z = om[l] * (a @ W.T) + b
        s, c = np.sin(z), np.cos(z)
        if l == 0:
            U = om[0] * W.T[:, None, :]  # (2, 1, width): dz/dx_d is the same for all points
        else:
            U = om[l] * (T.reshape(-1, T.shape[-1]) @ W.T).reshape(2, -1, W.shape[0])
        T_next = c[None] * U
        if keep:
            tape.append((a, T, s, c, U))
        a, T = s, T_next
    Wout, bout = params.W[-1], params.b[-1]
    phi = (a @ Wout.T)[:, 0] + bout[0]
    grad = (T.reshape(-1, T.shape[-1]) @ Wout[0]).reshape(2, -1).T  # (N, 2)
    if keep:
        tape.append((a, T))
    return phi, grad, tape


def forward_with_gradient(params: SirenParams, x, config: SirenConfig):
    """Phi and its exact input gradient at one point or a batch of points."""
    x = np.asarray(x, float)
    phi, grad, _ = _forward(params, x, config)
    if x.ndim == 1:
        return float(phi[0]), grad[0]
    return phi, grad


def _dataset_arrays(points, gradient):
    X = np.asarray(points.coords if isinstance(points, PointSet2) else points, float)
    G = np.asarray(gradient.values if isinstance(gradient, VectorSamples) else gradient, float)[:, :2]
    ok = np.all(np.isfinite(G), axis=1)
    if isinstance(points, PointSet2):
        ok &= points.valid
    if isinstance(gradient, VectorSamples):
        ok &= gradient.points.valid
    if not ok.any():
        raise EmptyFieldError("training set has no valid samples")
    return X[ok], G[ok]


def loss_and_param_gradient(params: SirenParams, points, gradient, config: SirenConfig):
    """Mean over points of |grad Phi - g|^2 and its exact parameter gradient."""
    X, G = _dataset_arrays(points, gradient)
    return _loss_grad(params, X, G, config)


def _loss_grad(params, X, G, config):
    N = len(X)
    _, grad, tape = _forward(params, X, config, keep=True)
    resid = grad - G
    loss = float(np.sum(resid * resid) / N)
    n_sine = len(params.W) - 1
    om = _omegas(config, n_sine)
    dW = [None] * len(params.W)
    db = [None] * len(params.b)

    a_last, T_last = tape[-1]
    E = (2.0 / N) * resid.T[:, :, None]  # (2, N, 1)
    Wout = params.W[-1]
    dW[-1] = (E.reshape(1, -1) @ T_last.reshape(-1, T_last.shape[-1]))
    db[-1] = np.zeros_like(params.b[-1])
    dT = E * Wout[None]          # (2, N, width)
    da = np.zeros_like(a_last)   # Phi does not enter the loss
    for l in range(n_sine - 1, -1, -1):
        a, T, s, c, U = tape[l]
        W = params.W[l]
        dU = dT * c[None]
        dc = np.sum(dT * U, axis=0)
        dz = da * c - dc * s
        db[l] = dz.sum(axis=0)
        dW[l] = om[l] * (dz.T @ a)
        if l == 0:
            # U = omega0 * W^T broadcast over points
            dW[l] += om[0] * dU.sum(axis=1).T
        else:
            h, k = W.shape
            dU2 = dU.reshape(-1, h)
            dW[l] += om[l] * (dU2.T @ T.reshape(-1, k))
            dT = om[l] * (dU2 @ W).reshape(2, -1, k)
            da = om[l] * (dz @ W)
    return loss, SirenParams(dW, db)


class Adam:
    def __init__(self, params: SirenParams, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]
        self.t = 0

    def step(self, params: SirenParams, grads: SirenParams):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(params.arrays(), grads.arrays(), self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def train(config: SirenConfig, train_cfg: TrainConfig, points, gradient, params=None,
          callback=None) -> SirenModel:
    """Full-batch ADAM; one epoch is one step over the whole dataset."""
    X, G = _dataset_arrays(points, gradient)
    params = init_siren(config) if params is None else params.copy()
    opt = Adam(params, train_cfg)
    history = []
    for epoch in range(train_cfg.epochs):
        loss, grads = _loss_grad(params, X, G, config)
        if not math.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}", iteration=epoch)
        history.append(loss)
        opt.step(params, grads)
        if callback is not None:
            callback(epoch, loss)
    return SirenModel(config, params, history, _hull(X))


def _hull(X):
    if len(X) < 3:
        return None
    from scipy.spatial import ConvexHull, QhullError

    try:
        return X[ConvexHull(X).vertices]
    except QhullError:
        return None


def evaluate(model: SirenModel, points: PointSet2):
    """Phi at ``points`` plus a boolean flag for points outside the training hull."""
    X = points.coords if isinstance(points, PointSet2) else np.asarray(points, float)
    phi, _, _ = _forward(model.params, X, model.config)
    return ScalarSamples(PointSet2(X), phi), outside_hull(model.hull, X)


def outside_hull(hull, X, tol=1e-12):
    if hull is None:
        return np.zeros(len(X), bool)
    out = np.zeros(len(X), bool)
    H = np.asarray(hull)
    for a, b in zip(H, np.roll(H, -1, axis=0)):
        e = b - a
        cross = e[0] * (X[:, 1] - a[1]) - e[1] * (X[:, 0] - a[0])
        out |= cross < -tol * max(1.0, np.hypot(*e))
    return out
