"""Networks, Adam, and the adversarial training loop on extreme-angle
coordinates.

Both networks are fully connected with leaky-ReLU(0.01) hidden units
and identity output. The critic loss carries a gradient penalty pushing
the critic toward unit gradient norm at points mixed uniformly between
real and generated batches; the generator loss adds a penalty on the
L2 distance (not squared) between the mean generated simplex point and
the uniform barycenter, which the target angular law must satisfy.

One epoch = n_D critic updates followed by one generator update. All
randomness flows from a single seed through spawned substreams, so a
config + seed pair reproduces training bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .aitchison import orthonormal_basis, to_coordinates
from .angular import extreme_angles
from .autodiff import Tape, backward, l2_norm, mean_all, row_l2_norms
from .errors import InputOutputError, ShapeError, ValidationError
from .margins import pareto_standardize

LEAKY_SLOPE = 0.01
CHECKPOINT_MAGIC = b"TGANCKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of one network: affine layers with leaky-ReLU between."""

    input_dim: int
    output_dim: int
    hidden_layers: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        for name in ("input_dim", "output_dim"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if any(w < 1 for w in self.hidden_layers):
            raise ValidationError(f"hidden widths must be positive, got {self.hidden_layers}")

    def layer_dims(self):
        """Consecutive (fan_in, fan_out) pairs of every affine layer."""
        dims = (self.input_dim, *self.hidden_layers, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))

    def parameter_count(self):
        return sum(i * o + o for i, o in self.layer_dims())


@dataclass(frozen=True)
class AdamConfig:
    alpha: float = 5e-4
    beta1: float = 0.5
    beta2: float = 0.9
    epsilon: float = 1e-8

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValidationError(f"alpha must be > 0, got {self.alpha!r}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and 0.0 <= v < 1.0):
                raise ValidationError(f"{name} must lie in [0, 1), got {v!r}")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon!r}")
        for name in ("alpha", "beta1", "beta2", "epsilon"):
            object.__setattr__(self, name, float(getattr(self, name)))


@dataclass(frozen=True)
class TrainConfig:
    """Algorithm inputs: threshold rank k1, penalty weights, loop sizes."""

    k1: int
    lambda_gp: float = 5.0
    rho_marginal: float = 1.0
    n_D: int = 5
    batch_size: int = 64
    adam: AdamConfig = AdamConfig()
    latent_dim: int = 16
    n_epochs: int = 1000
    seed: int = 0

    def __post_init__(self):
        for name in ("k1", "n_D", "batch_size", "latent_dim"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        for name in ("lambda_gp", "rho_marginal"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ValidationError(f"{name} must be > 0, got {v!r}")
        if not isinstance(self.n_epochs, (int, np.integer)) or self.n_epochs < 0:
            raise ValidationError(f"n_epochs must be >= 0, got {self.n_epochs!r}")
        if not isinstance(self.seed, (int, np.integer)):
            raise ValidationError(f"seed must be an integer, got {self.seed!r}")
        if not isinstance(self.adam, AdamConfig):
            raise ValidationError("adam must be an AdamConfig")
        for name in ("k1", "n_D", "batch_size", "latent_dim", "n_epochs", "seed"):
            object.__setattr__(self, name, int(getattr(self, name)))
        for name in ("lambda_gp", "rho_marginal"):
            object.__setattr__(self, name, float(getattr(self, name)))


@dataclass(frozen=True)
class NetworkParams:
    """Trained weights: per-layer (W, b) tuples for each network."""

    generator: tuple
    discriminator: tuple


@dataclass(frozen=True)
class AdamState:
    m: tuple
    v: tuple
    t: int = 0


@dataclass(frozen=True)
class TrainResult:
    params: NetworkParams
    loss_log: np.ndarray  # (n_epochs, 2) columns: critic loss, generator loss
    n_extremes: int
    d: int


def _init_mlp(spec, rng):
    layers = []
    for fan_in, fan_out in spec.layer_dims():
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = np.zeros((1, fan_out))
        layers.append((w, b))
    return tuple(layers)


def init_networks(spec_G, spec_D, seed):
    """Fresh parameter draw; uniform +-sqrt(6/(fan_in+fan_out)), zero biases."""
    if not isinstance(spec_G, MlpSpec) or not isinstance(spec_D, MlpSpec):
        raise ValidationError("init_networks expects MlpSpec inputs")
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    child_g, child_d = ss.spawn(2)
    return NetworkParams(
        generator=_init_mlp(spec_G, np.random.default_rng(child_g)),
        discriminator=_init_mlp(spec_D, np.random.default_rng(child_d)),
    )


def mlp_apply(params, x, slope=LEAKY_SLOPE):
    """Plain forward pass (no tape); used for generation."""
    h = np.asarray(x, dtype=np.float64)
    last = len(params) - 1
    for i, (w, b) in enumerate(params):
        h = h @ w + b
        if i < last:
            h = np.where(h >= 0.0, h, slope * h)
    return h


def _lift_params(tape, params, requires_grad):
    return [
        (tape.leaf(w, requires_grad=requires_grad), tape.leaf(b, requires_grad=requires_grad))
        for (w, b) in params
    ]


def _flatten(param_nodes):
    flat = []
    for w, b in param_nodes:
        flat.append(w)
        flat.append(b)
    return flat


def _regroup(flat):
    return tuple((flat[i], flat[i + 1]) for i in range(0, len(flat), 2))


def mlp_forward(tape, x, param_nodes, slope=LEAKY_SLOPE):
    """Forward pass recorded on the tape; x is a node."""
    h = x
    last = len(param_nodes) - 1
    for i, (w, b) in enumerate(param_nodes):
        h = tape.add_rowvec(tape.matmul(h, w), b)
        if i < last:
            h = tape.leaky_relu(h, slope)
    return h


def _check_batch(name, arr, dim=None):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ShapeError(f"{name} must be a nonempty 2-D batch, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ShapeError(f"{name} must have {dim} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    return arr


def discriminator_loss(batch_real, batch_fake, batch_mixed, params_D, lam):
    """Critic loss with gradient penalty; returns (scalar node, parameter nodes).

    The returned nodes share one tape: backward on the loss with the
    parameter nodes as targets yields the critic gradient, including the
    second-order contribution of the penalty term.
    """
    dim = params_D[0][0].shape[0]
    batch_real = _check_batch("batch_real", batch_real, dim)
    batch_fake = _check_batch("batch_fake", batch_fake, dim)
    batch_mixed = _check_batch("batch_mixed", batch_mixed, dim)
    if not batch_real.shape == batch_fake.shape == batch_mixed.shape:
        raise ShapeError(
            f"batches must share one shape, got {batch_real.shape}, "
            f"{batch_fake.shape}, {batch_mixed.shape}"
        )
    if not (np.isfinite(lam) and lam >= 0.0):
        raise ValidationError(f"lambda must be finite and >= 0, got {lam!r}")

    tape = Tape()
    p_nodes = _lift_params(tape, params_D, requires_grad=True)
    d_real = mlp_forward(tape, tape.const(batch_real), p_nodes)
    d_fake = mlp_forward(tape, tape.const(batch_fake), p_nodes)

    x_hat = tape.leaf(batch_mixed, requires_grad=True)
    d_hat = mlp_forward(tape, x_hat, p_nodes)
    (grad_x,) = backward(tape, tape.sum_all(d_hat), wrt=[x_hat], create_graph=True)
    norms = row_l2_norms(tape, grad_x)
    penalty = tape.pow_scalar(tape.add_scalar(norms, -1.0), 2)

    per_point = tape.add(tape.sub(d_fake, d_real), tape.mul_scalar(penalty, float(lam)))
    return mean_all(tape, per_point), p_nodes


def generator_loss(latents, params_G, params_D, V, rho):
    """Generator loss with barycenter penalty; returns (scalar node, parameter nodes)."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != V.shape[1] + 1:
        raise ShapeError(f"basis must have shape (d, d-1), got {V.shape}")
    d = V.shape[0]
    latent_dim = params_G[0][0].shape[0]
    latents = _check_batch("latents", latents, latent_dim)
    out_dim = params_G[-1][0].shape[1]
    if out_dim != d - 1:
        raise ShapeError(f"generator emits {out_dim} coordinates, basis expects {d - 1}")
    if params_D[0][0].shape[0] != d - 1:
        raise ShapeError(
            f"discriminator consumes {params_D[0][0].shape[0]} coordinates, expected {d - 1}"
        )
    if not (np.isfinite(rho) and rho >= 0.0):
        raise ValidationError(f"rho must be finite and >= 0, got {rho!r}")

    m = latents.shape[0]
    tape = Tape()
    g_nodes = _lift_params(tape, params_G, requires_grad=True)
    d_nodes = _lift_params(tape, params_D, requires_grad=False)
    coords = mlp_forward(tape, tape.const(latents), g_nodes)
    d_out = mlp_forward(tape, coords, d_nodes)
    adv = tape.mul_scalar(mean_all(tape, d_out), -1.0)

    simplex = tape.softmax_rows(tape.matmul(coords, tape.const(V.T)))
    mean_point = tape.mul_scalar(tape.sum_axis0(simplex), 1.0 / m)
    gap = tape.sub(mean_point, tape.const(np.full((1, d), 1.0 / d)))
    loss = tape.add(adv, tape.mul_scalar(l2_norm(tape, gap), float(rho)))
    return loss, g_nodes


def init_adam(params):
    zeros = tuple((np.zeros_like(w), np.zeros_like(b)) for (w, b) in params)
    return AdamState(m=zeros, v=tuple((z[0].copy(), z[1].copy()) for z in zeros), t=0)


def adam_step(params, grads, state, alpha, beta1, beta2, epsilon):
    """One bias-corrected Adam update; returns (new params, new state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads, and state must have matching layer counts")
    t = state.t + 1
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    new_params, new_m, new_v = [], [], []
    for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(params, grads, state.m, state.v):
        layer_p, layer_m, layer_v = [], [], []
        for p, g, m_, v_ in ((w, gw, mw, vw), (b, gb, mb, vb)):
            if p.shape != g.shape:
                raise ShapeError(f"gradient shape {g.shape} does not match {p.shape}")
            m_new = beta1 * m_ + (1.0 - beta1) * g
            v_new = beta2 * v_ + (1.0 - beta2) * (g * g)
            step = alpha * (m_new / c1) / (np.sqrt(v_new / c2) + epsilon)
            layer_p.append(p - step)
            layer_m.append(m_new)
            layer_v.append(v_new)
        new_params.append(tuple(layer_p))
        new_m.append(tuple(layer_m))
        new_v.append(tuple(layer_v))
    return tuple(new_params), AdamState(m=tuple(new_m), v=tuple(new_v), t=t)


def _grad_arrays(loss, p_nodes):
    flat = backward(loss.tape, loss, wrt=_flatten(p_nodes))
    return _regroup(flat)


def train(X, cfg, spec_G, spec_D):
    """Full training pipeline on raw data rows; returns a TrainResult."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got shape {X.shape}")
    if not isinstance(cfg, TrainConfig):
        raise ValidationError("cfg must be a TrainConfig")
    if not isinstance(spec_G, MlpSpec) or not isinstance(spec_D, MlpSpec):
        raise ValidationError("spec_G and spec_D must be MlpSpec instances")
    d = X.shape[1]
    if d < 2:
        raise ValidationError(f"need at least 2 columns, got {d}")
    if spec_G.input_dim != cfg.latent_dim:
        raise ShapeError(
            f"generator input {spec_G.input_dim} != latent_dim {cfg.latent_dim}"
        )
    if spec_G.output_dim != d - 1 or spec_D.input_dim != d - 1:
        raise ShapeError(
            f"networks must map through {d - 1} coordinates for d={d}, got "
            f"generator out {spec_G.output_dim}, discriminator in {spec_D.input_dim}"
        )
    if spec_D.output_dim != 1:
        raise ShapeError(f"discriminator must emit one value, got {spec_D.output_dim}")

    vhat = pareto_standardize(X)
    phi, K = extreme_angles(vhat, cfg.k1)
    m = cfg.batch_size
    if m > K:
        raise ValidationError(
            f"batch_size {m} exceeds the {K} extreme angles available; "
            f"lower batch_size or raise k1"
        )
    V = orthonormal_basis(d)
    coords = to_coordinates(phi.points, V)

    ss = np.random.SeedSequence(cfg.seed)
    ss_init, ss_loop = ss.spawn(2)
    params = init_networks(spec_G, spec_D, ss_init)
    rng = np.random.default_rng(ss_loop)

    params_g = params.generator
    params_d = params.discriminator
    state_g = init_adam(params_g)
    state_d = init_adam(params_d)
    a = cfg.adam

    log = np.zeros((cfg.n_epochs, 2))
    for epoch in range(cfg.n_epochs):
        loss_d_val = 0.0
        for _ in range(cfg.n_D):
            idx = rng.integers(0, K, size=m)
            real = coords[idx]
            z = rng.standard_normal((m, cfg.latent_dim))
            fake = mlp_apply(params_g, z)
            u = rng.random((m, 1))
            mixed = u * real + (1.0 - u) * fake
            loss_d, d_nodes = discriminator_loss(real, fake, mixed, params_d, cfg.lambda_gp)
            grads = _grad_arrays(loss_d, d_nodes)
            params_d, state_d = adam_step(
                params_d, grads, state_d, a.alpha, a.beta1, a.beta2, a.epsilon
            )
            loss_d_val = float(loss_d.value[0, 0])

        z = rng.standard_normal((m, cfg.latent_dim))
        loss_g, g_nodes = generator_loss(z, params_g, params_d, V, cfg.rho_marginal)
        grads = _grad_arrays(loss_g, g_nodes)
        params_g, state_g = adam_step(
            params_g, grads, state_g, a.alpha, a.beta1, a.beta2, a.epsilon
        )
        log[epoch, 0] = loss_d_val
        log[epoch, 1] = float(loss_g.value[0, 0])

    return TrainResult(
        params=NetworkParams(generator=params_g, discriminator=params_d),
        loss_log=log,
        n_extremes=int(K),
        d=d,
    )


# ---------------------------------------------------------------------------
# Checkpoint format: magic, uint32 version, uint32 header length, JSON
# header, then per-layer float64 little-endian row-major W and b blocks,
# generator first.
# ---------------------------------------------------------------------------


def _spec_from_params(params):
    dims = [params[0][0].shape[0]] + [w.shape[1] for (w, _) in params]
    return MlpSpec(input_dim=dims[0], output_dim=dims[-1], hidden_layers=tuple(dims[1:-1]))


def save_checkpoint(path, params, cfg, d):
    """Write generator and critic weights with a self-describing header."""
    if not isinstance(params, NetworkParams):
        raise ValidationError("params must be a NetworkParams")
    if not isinstance(cfg, TrainConfig):
        raise ValidationError("cfg must be a TrainConfig")
    spec_g = _spec_from_params(params.generator)
    spec_d = _spec_from_params(params.discriminator)
    header = {
        "d": int(d),
        "latent_dim": int(spec_g.input_dim),
        "basis_dim": int(spec_g.output_dim),
        "generator_hidden": list(spec_g.hidden_layers),
        "discriminator_hidden": list(spec_d.hidden_layers),
        "activation": {"hidden": "leaky_relu", "slope": LEAKY_SLOPE, "final": "identity"},
        "seed": int(cfg.seed),
        "k1": int(cfg.k1),
        "config": asdict(cfg),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(np.uint32(CHECKPOINT_VERSION).tobytes())
            fh.write(np.uint32(len(blob)).tobytes())
            fh.write(blob)
            for net in (params.generator, params.discriminator):
                for w, b in net:
                    fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
                    fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    except OSError as exc:
        raise InputOutputError(f"cannot write checkpoint {path}: {exc}") from exc


def _read_layers(buf, offset, dims):
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        n = fan_in * fan_out
        w = np.frombuffer(buf, dtype="<f8", count=n, offset=offset).reshape(fan_in, fan_out)
        offset += 8 * n
        b = np.frombuffer(buf, dtype="<f8", count=fan_out, offset=offset).reshape(1, fan_out)
        offset += 8 * fan_out
        layers.append((w.copy(), b.copy()))
    return tuple(layers), offset


def load_checkpoint(path):
    """Read a checkpoint; returns (NetworkParams, header dict)."""
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise InputOutputError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(buf) < 16 or buf[:8] != CHECKPOINT_MAGIC:
        raise InputOutputError(f"{path} is not a checkpoint (bad magic)")
    version = int(np.frombuffer(buf, dtype="<u4", count=1, offset=8)[0])
    if version != CHECKPOINT_VERSION:
        raise InputOutputError(f"unsupported checkpoint version {version}")
    hlen = int(np.frombuffer(buf, dtype="<u4", count=1, offset=12)[0])
    if len(buf) < 16 + hlen:
        raise InputOutputError(f"{path} is truncated")
    try:
        header = json.loads(buf[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputOutputError(f"{path} has a corrupt header: {exc}") from exc
    try:
        dims_g = [header["latent_dim"], *header["generator_hidden"], header["basis_dim"]]
        dims_d = [header["basis_dim"], *header["discriminator_hidden"], 1]
    except KeyError as exc:
        raise InputOutputError(f"{path} header misses field {exc}") from exc
    expected = 16 + hlen
    for dims in (dims_g, dims_d):
        for i, o in zip(dims[:-1], dims[1:]):
            expected += 8 * (i * o + o)
    if len(buf) != expected:
        raise InputOutputError(
            f"{path} has {len(buf)} bytes, expected {expected} from its header"
        )
    gen, offset = _read_layers(buf, 16 + hlen, dims_g)
    disc, offset = _read_layers(buf, offset, dims_d)
    return NetworkParams(generator=gen, discriminator=disc), header
