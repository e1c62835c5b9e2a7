"""DDCD-Nonlinear and DDCD-Smooth.

Both models are built from :class:`ScalarMLP`, a tiny scalar-to-scalar
network applied entrywise to a matrix with one shared parameter set, with
hand-written reverse-mode gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .acyclicity import h_khop
from .diffusion import perturb
from .exceptions import ValidationError
from .graph_synth import Dataset, break_cycles
from .linear_model import denoising_loss_linear, penalties
from .optimizer import TrainConfig, default_config
from .training import run_training

_ACTIVATIONS = ("tanh", "relu", "identity")
# tanh rounds to +-1 beyond |u| ~ 19; normalised features stay strictly inside
_NORM_EDGE = np.nextafter(1.0, 0.0)


def _act(name, h):
    if name == "tanh":
        return np.tanh(h)
    if name == "relu":
        return np.maximum(h, 0.0)
    return h


def _act_grad(name, h, a):
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (h > 0).astype(float)
    return np.ones_like(h)


@dataclass
class MLPCache:
    shape: tuple
    inputs: list
    pre: list
    post: list
    snapshot: dict


class ScalarMLP:
    """Scalar map ``R -> R`` applied to every entry of its input.

    ``widths`` runs from 1 to 1, e.g. ``(1, 16, 1)``; ``activations`` has one
    entry per layer.
    """

    def __init__(self, widths=(1, 16, 1), activations=("tanh", "identity"), seed=0, name="mlp"):
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2 or widths[0] != 1 or widths[-1] != 1:
            raise ValidationError(f"widths must start and end with 1, got {widths}")
        if len(activations) != len(widths) - 1 or any(a not in _ACTIVATIONS for a in activations):
            raise ValidationError(f"need {len(widths) - 1} activations from {_ACTIVATIONS}")
        self.widths = widths
        self.activations = tuple(activations)
        self.name = name
        rng = np.random.default_rng(seed)
        self.params = {}
        for i, (w_in, w_out) in enumerate(zip(widths, widths[1:])):
            self.params[f"{name}.W{i}"] = rng.normal(0.0, 1.0 / np.sqrt(w_in), size=(w_in, w_out))
            # hidden biases are random so the map is neither odd nor even at init
            last = i == len(widths) - 2
            self.params[f"{name}.b{i}"] = np.zeros(w_out) if last else rng.normal(0.0, 1.0, size=w_out)

    @property
    def n_layers(self):
        return len(self.widths) - 1

    def n_params(self):
        return sum(p.size for p in self.params.values())

    def weight(self, i):
        return self.params[f"{self.name}.W{i}"]

    def bias(self, i):
        return self.params[f"{self.name}.b{i}"]

    def __call__(self, U):
        return self.forward(U)[0]

    def derivative(self, U):
        """Elementwise ``df/du`` at ``U``."""
        U = np.asarray(U, dtype=float)
        a = U.reshape(-1, 1)
        g = np.ones_like(a)
        for i, act in enumerate(self.activations):
            h = a @ self.weight(i) + self.bias(i)
            a = _act(act, h)
            # carry one column per unit: g holds d(a_unit)/du
            g = (g @ self.weight(i)) * _act_grad(act, h, a)
        return g.reshape(U.shape)

    def forward(self, U):
        U = np.asarray(U, dtype=float)
        a = U.reshape(-1, 1)
        inputs, pre, post = [], [], []
        for i, act in enumerate(self.activations):
            inputs.append(a)
            h = a @ self.weight(i) + self.bias(i)
            a = _act(act, h)
            pre.append(h)
            post.append(a)
        snapshot = {k: v.copy() for k, v in self.params.items()}
        return a.reshape(U.shape), MLPCache(U.shape, inputs, pre, post, snapshot)

    def backward(self, upstream, cache: MLPCache):
        """Reverse pass; returns ``(param_grads, input_grad)``."""
        for k, v in self.params.items():
            if not np.array_equal(v, cache.snapshot[k]):
                raise ValidationError("stale cache: parameters changed since the forward pass")
        g = np.asarray(upstream, dtype=float).reshape(-1, 1)
        grads = {}
        for i in reversed(range(self.n_layers)):
            g = g * _act_grad(self.activations[i], cache.pre[i], cache.post[i])
            grads[f"{self.name}.W{i}"] = cache.inputs[i].T @ g
            grads[f"{self.name}.b{i}"] = g.sum(axis=0)
            g = g @ self.weight(i).T
        return grads, g.reshape(cache.shape)

    def sample_curve(self, lo=-3.0, hi=3.0, num=201):
        x = np.linspace(lo, hi, num)
        return x, self(x)


def _check_diag(W):
    if np.any(np.diag(W) != 0):
        raise ValidationError("W must have a zero diagonal")


# ---------------------------------------------------------------- nonlinear


@dataclass
class NonlinearModel:
    W: np.ndarray
    f1: ScalarMLP
    f2: ScalarMLP
    lambda1: float = 0.0
    lambda2: float = 0.0
    latent_weight: float = 1.0
    standardize_latent: bool = True

    @classmethod
    def init(cls, d, hidden_width=16, seed=0, **kw):
        f1 = ScalarMLP((1, hidden_width, 1), ("tanh", "identity"), seed=[int(seed), 11], name="f1")
        f2 = ScalarMLP((1, hidden_width, 1), ("tanh", "identity"), seed=[int(seed), 12], name="f2")
        return cls(np.zeros((d, d)), f1, f2, **kw)

    @property
    def params(self):
        return {"W": self.W, **self.f1.params, **self.f2.params}

    def encode(self, X):
        """Latent ``Y``; centred and rescaled over the rows of ``X`` when enabled."""
        Y = self.f1(X)
        return _standardize(Y)[0] if self.standardize_latent else Y

    def predict(self, X):
        return self.f2(self.encode(X) @ self.W)


def canonicalize_scale(model: NonlinearModel, X):
    """Fix the free scale shared by ``W`` and the decoder input.

    ``f2(Y W)`` is unchanged under ``W -> c W`` with the decoder's first
    layer divided by ``c``. ``c`` is chosen so the decoder has unit RMS slope
    on the latent inputs ``Y W`` seen on ``X``, which makes ``|W|`` comparable
    with a fixed threshold. Returns ``c``.
    """
    S = model.encode(X) @ model.W
    slope = np.sqrt(np.mean(model.f2.derivative(S) ** 2))
    if not np.isfinite(slope) or slope == 0.0:
        return 1.0
    model.W *= slope
    model.f2.params[f"{model.f2.name}.W0"] /= slope
    return float(slope)


def _standardize(Y, eps=1e-8):
    """Centre each column and divide by one scale shared by all columns.

    A shared scale keeps the relative column spreads that orient edges while
    stopping the encoder from shrinking the latent towards a constant.
    """
    C = Y - Y.mean(axis=0)
    sigma = np.sqrt(np.mean(C * C) + eps)
    return C / sigma, sigma


def _standardize_backward(dYn, Yn, sigma):
    return (dYn - dYn.mean(axis=0) - Yn * np.mean(dYn * Yn)) / sigma


def nonlinear_loss(model: NonlinearModel, X0, t, schedule, Z=None, seed=None, k=None, gamma=1.0, penalty=None):
    """Reconstruction + latent denoising + penalties, with gradients for every parameter.

    ``Y = f1(X0)`` is perturbed to ``Y_t`` at timesteps ``t`` (noise ``Z`` or
    drawn from ``seed``). ``penalty`` (a :class:`~ddcd.optimizer.DagPenalty`)
    and ``k`` switch on the acyclicity term.
    """
    X0 = np.asarray(X0, dtype=float)
    W = model.W
    b, d = X0.shape
    if W.shape != (d, d):
        raise ValidationError(f"W shape {W.shape} does not match data width {d}")
    _check_diag(W)

    F, c1 = model.f1.forward(X0)
    if model.standardize_latent:
        Y, sigma = _standardize(F)
    else:
        Y = F
    S = Y @ W
    Xhat, c2 = model.f2.forward(S)
    R = X0 - Xhat
    rec = 0.5 / b * np.sum(R * R)

    batch = perturb(Y, schedule, t, seed, Z=Z)
    U = batch.X_t - batch.noise
    D = U - U @ W
    den = model.latent_weight * 0.5 / b * np.sum(D * D)

    pen, gW = penalties(W, model.lambda1, model.lambda2)
    total = rec + den + pen

    # reconstruction branch
    g2, dS = model.f2.backward(-R / b, c2)
    gW = gW + Y.T @ dS
    dY = dS @ W.T
    # latent denoising branch; U = sqrt(abar) * Y up to rounding
    dD = model.latent_weight * D / b
    gW = gW - U.T @ dD
    dY = dY + batch.sqrt_abar[:, None] * (dD - dD @ W.T)
    if model.standardize_latent:
        dY = _standardize_backward(dY, Y, sigma)
    g1, _ = model.f1.backward(dY, c1)

    h = 0.0
    if penalty is not None and k is not None:
        hk = h_khop(W, k, gamma)
        h = hk.value
        total += penalty.value(h)
        gW = gW + penalty.slope(h) * hk.gradient
    np.fill_diagonal(gW, 0.0)
    components = {"loss": float(total), "reconstruction": float(rec), "denoise": float(den), "h": float(h)}
    return components, {"W": gW, **g1, **g2}


def fit_nonlinear(data, config: TrainConfig | None = None):
    """Jointly fit ``W``, encoder ``f1`` and decoder ``f2``.

    Returns ``(W_hat, f1, f2, history)``.
    """
    config = config or default_config("nonlinear")
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if X.shape[0] < 2:
        raise ValidationError("need at least two samples")
    model = NonlinearModel.init(
        X.shape[1], config.hidden_width, config.seed,
        lambda1=config.lambda1, lambda2=config.lambda2, latent_weight=config.latent_weight,
        standardize_latent=config.standardize_latent,
    )

    def objective(X0, t, seed, k, penalty):
        return nonlinear_loss(model, X0, t, config.noise_schedule, seed=seed, k=k,
                              gamma=config.khop_schedule.gamma, penalty=penalty)

    history = run_training(X, model.params, objective, config)
    canonicalize_scale(model, X)
    if config.prune_cycles:
        model.W[...] = break_cycles(model.W, config.threshold)[0]
    return model.W, model.f1, model.f2, history


# ------------------------------------------------------------------- smooth


@dataclass
class SmoothModel:
    """Feature normaliser followed by a linear denoising SEM on normalised features.

    Columns are standardised with statistics from the training data and then
    passed through ``normalizer``, whose final tanh keeps every feature in
    (-1, 1). ``W`` lives on that normalised scale.
    """

    W: np.ndarray
    normalizer: ScalarMLP
    mean: np.ndarray
    scale: np.ndarray
    lambda1: float = 0.0
    lambda2: float = 0.0
    train_normalizer: bool = False
    extra: dict = field(default_factory=dict)

    @classmethod
    def init(cls, X, **kw):
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        norm = ScalarMLP((1, 1), ("tanh",), name="norm")
        norm.params["norm.W0"][:] = 1.0
        return cls(np.zeros((X.shape[1],) * 2), norm, mean, scale, **kw)

    @property
    def params(self):
        if self.train_normalizer:
            return {"W": self.W, **self.normalizer.params}
        return {"W": self.W}

    def standardize(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def normalize(self, X):
        return np.clip(self.normalizer(self.standardize(X)), -_NORM_EDGE, _NORM_EDGE)


def smooth_loss(model: SmoothModel, X0, t, schedule, Z=None, seed=None, k=None, gamma=1.0, penalty=None):
    """Linear denoising objective on normalised features.

    Gradients are returned for ``W`` and for the normaliser parameters; the
    latter are only applied when the model trains its normaliser.
    """
    _check_diag(model.W)
    Xs = model.standardize(X0)
    N, cache = model.normalizer.forward(Xs)
    N = np.clip(N, -_NORM_EDGE, _NORM_EDGE)
    batch = perturb(N, schedule, t, seed, Z=Z)
    loss, gW = denoising_loss_linear(batch, model.W, model.lambda1, model.lambda2)

    b = N.shape[0]
    U = batch.X_t - batch.noise
    D = U - U @ model.W
    dN = batch.sqrt_abar[:, None] * ((D - D @ model.W.T) / b)
    gnorm, _ = model.normalizer.backward(dN, cache)

    h = 0.0
    total = loss
    if penalty is not None and k is not None:
        hk = h_khop(model.W, k, gamma)
        h = hk.value
        total += penalty.value(h)
        gW = gW + penalty.slope(h) * hk.gradient
        np.fill_diagonal(gW, 0.0)
    components = {"loss": float(total), "denoise": float(loss), "h": float(h)}
    return components, {"W": gW, **gnorm}


def fit_smooth(data, config: TrainConfig | None = None):
    """Fit DDCD-Smooth; returns ``(W_hat, model, history)`` with ``W_hat`` on the normalised scale."""
    config = config or default_config("smooth")
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if X.shape[0] < 2:
        raise ValidationError("need at least two samples")
    model = SmoothModel.init(X, lambda1=config.lambda1, lambda2=config.lambda2,
                             train_normalizer=config.train_normalizer)
    params = model.params

    def objective(X0, t, seed, k, penalty):
        components, grads = smooth_loss(model, X0, t, config.noise_schedule, seed=seed, k=k,
                                        gamma=config.khop_schedule.gamma, penalty=penalty)
        return components, {key: grads[key] for key in params}

    history = run_training(X, params, objective, config)
    if config.prune_cycles:
        model.W[...] = break_cycles(model.W, config.threshold)[0]
    return model.W, model, history


# ------------------------------------------------- noise variance check


def theorem2_noise_check(W_normalized, alpha_bar, n_mc=100_000, seed=0):
    """Monte-Carlo variance of ``sqrt(1 - abar) W^T z`` for standard normal ``z``.

    Returns ``(empirical_var, predicted_var)``, one entry per column of W,
    where the prediction is ``(1 - abar) * sum_i W[i, j]**2``.
    """
    W = np.asarray(W_normalized, dtype=float)
    if n_mc < 2:
        raise ValidationError("n_mc must be >= 2")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((int(n_mc), W.shape[0]))
    v = np.sqrt(1.0 - alpha_bar) * (z @ W)
    return v.var(axis=0), (1.0 - alpha_bar) * np.sum(W * W, axis=0)


def uniform_weight_prediction(d, alpha_bar):
    """The ``(1 - abar) / d`` approximation for entries of size about 1/d."""
    return (1.0 - alpha_bar) / d
