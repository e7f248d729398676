"""Minimal fully connected discriminator with exact gradients, the
least-squares adversarial loss with gradient penalty, and the state-pair
assembly used for adversarial motion imitation.

The network is affine layers with LeakyReLU between them and a bare linear
scalar output.  All gradients are hand-derived:

* the two least-squares terms use plain backpropagation;
* the gradient penalty mean ||grad_input D||^2 over reference samples needs
  the derivative of a backward pass, i.e. second-order propagation.  Because
  LeakyReLU is piecewise linear its activation masks are locally constant, so
  the exact parameter gradient of the penalty only flows through the weight
  matrices appearing in the input-gradient recursion (and is identically zero
  for biases).  The alternative reading of the penalty -- gradient taken with
  respect to the parameters instead of the input -- is available as
  ``penalty_mode="params"`` and is differentiated exactly via
  forward-over-reverse Hessian-vector products.  The two readings are never
  mixed.

Everything is plain float64 numpy; training is fixed-rate gradient descent so
the gradient contract stays exactly testable against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import forward_kinematics, quat_to_rot
from .model import validate_state

__all__ = [
    "DiscriminatorNet",
    "NetGradients",
    "TrainConfig",
    "TrainingDivergedError",
    "assemble_amp_state",
    "assemble_amp_pair",
    "amp_state_dim",
    "forward",
    "input_gradient",
    "lsgan_loss",
    "loss_gradient",
    "train",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
    "load_pair_dataset",
    "save_pair_dataset",
]

PENALTY_MODES = ("input", "params")


class TrainingDivergedError(RuntimeError):
    """Training loss exceeded the divergence guard."""


# ---------------------------------------------------------------------------
# state assembly
# ---------------------------------------------------------------------------

def amp_state_dim(model):
    """2n + 3 * contact frames + 7."""
    return 2 * model.n + 3 * len(model.contact_frames) + 7


def assemble_amp_state(model, state):
    """Concatenate [q_joints; qd_joints; foot positions (body frame, per
    contact frame); v_base (body); w_base (body); base height]."""
    state = validate_state(model, state)
    fk = forward_kinematics(model, state)
    r_base = quat_to_rot(state.base_orientation)
    feet = [
        r_base.T @ (fk.contact_positions[c.name] - state.base_position)
        for c in model.contact_frames
    ]
    return np.concatenate(
        [state.joint_positions, state.joint_velocities]
        + feet
        + [
            r_base.T @ state.base_linear_velocity,
            r_base.T @ state.base_angular_velocity,
            [state.base_position[2]],
        ]
    )


def assemble_amp_pair(model, state_t, state_next):
    """Discriminator input: two consecutive assembled states, concatenated."""
    return np.concatenate([assemble_amp_state(model, state_t), assemble_amp_state(model, state_next)])


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DiscriminatorNet:
    """Affine layers with LeakyReLU between them; linear scalar output.

    weights[l] has shape (d_l, d_{l+1}); the final output dimension must be 1.
    """

    weights: list
    biases: list
    leaky_slope: float = 0.01

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up layer by layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {l}: weight {w.shape} and bias {b.shape} are incompatible")
            if l and self.weights[l - 1].shape[1] != w.shape[0]:
                raise ValueError(
                    f"layer {l}: input dim {w.shape[0]} does not match previous output "
                    f"{self.weights[l - 1].shape[1]}"
                )
        if self.weights[-1].shape[1] != 1:
            raise ValueError("final layer must produce a single scalar output")

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @classmethod
    def initialize(cls, layer_sizes, seed, leaky_slope=0.01):
        """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for din, dout in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(din)
            weights.append(rng.uniform(-bound, bound, (din, dout)))
            biases.append(rng.uniform(-bound, bound, dout))
        return cls(weights=weights, biases=biases, leaky_slope=float(leaky_slope))

    def copy(self):
        return DiscriminatorNet(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            leaky_slope=self.leaky_slope,
        )


@dataclass(eq=False)
class NetGradients:
    """Parameter gradients with the same shapes as the net they came from."""

    weights: list
    biases: list

    @classmethod
    def zeros_like(cls, net):
        return cls(
            weights=[np.zeros_like(w) for w in net.weights],
            biases=[np.zeros_like(b) for b in net.biases],
        )

    def flat(self):
        return np.concatenate([a.ravel() for a in self.weights + self.biases])


def _as_batch(x, d0):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != d0:
        raise ValueError(f"input has shape {x.shape}, network expects (*, {d0})")
    return x, single


def _forward_full(net, x):
    """Returns (y (B,), activations a_0..a_{L-1}, masks D_l = phi'(z_l))."""
    acts = [x]
    masks = []
    a = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w + b
        mask = np.where(z > 0.0, 1.0, net.leaky_slope)
        a = np.where(z > 0.0, z, net.leaky_slope * z)
        acts.append(a)
        masks.append(mask)
    y = (a @ net.weights[-1] + net.biases[-1])[:, 0]
    return y, acts, masks


def forward(net, x):
    """Evaluate the discriminator; accepts one vector or a batch."""
    xb, single = _as_batch(x, net.layer_sizes[0])
    y, _, _ = _forward_full(net, xb)
    return float(y[0]) if single else y


def _input_gradient_pass(net, masks, batch_size):
    """Per-sample gradient of the output w.r.t. the input, plus the
    intermediate Q_l = dD/da_l and R_l = Q_{l+1} * mask_l of the recursion."""
    qs = [None] * len(net.weights)   # qs[l] = dD/da_l, shape (B, d_l)
    rs = [None] * (len(net.weights) - 1)
    q = np.repeat(net.weights[-1][:, 0][None, :], batch_size, axis=0)
    qs[len(net.weights) - 1] = q
    for l in range(len(net.weights) - 2, -1, -1):
        r = q * masks[l]
        rs[l] = r
        q = r @ net.weights[l].T
        qs[l] = q
    return q, qs, rs


def input_gradient(net, x):
    """grad_x D(x) for one vector or each row of a batch."""
    xb, single = _as_batch(x, net.layer_sizes[0])
    _, _, masks = _forward_full(net, xb)
    g, _, _ = _input_gradient_pass(net, masks, xb.shape[0])
    return g[0] if single else g


def _backprop(net, acts, masks, dy, grads):
    """Accumulate dLoss/dparams into grads given dLoss/dy (shape (B,))."""
    delta = dy[:, None]
    grads.weights[-1] += acts[-1].T @ delta
    grads.biases[-1] += delta.sum(axis=0)
    da = delta @ net.weights[-1].T
    for l in range(len(net.weights) - 2, -1, -1):
        dz = da * masks[l]
        grads.weights[l] += acts[l].T @ dz
        grads.biases[l] += dz.sum(axis=0)
        da = dz @ net.weights[l].T
    return grads


def _gp_input_value_and_grads(net, masks, batch_size, want_grads):
    """mean ||grad_x D||^2 over the batch and (optionally) its exact parameter
    gradient.  Reverse pass over the input-gradient recursion; activation
    masks are locally constant, so biases get no gradient from this term."""
    g, qs, rs = _input_gradient_pass(net, masks, batch_size)
    value = float(np.sum(g * g) / batch_size)
    if not want_grads:
        return value, None
    grads = NetGradients.zeros_like(net)
    qbar = (2.0 / batch_size) * g
    for l in range(len(net.weights) - 1):
        # adjoint of q_l = r_l @ W_l^T
        grads.weights[l] += qbar.T @ rs[l]
        rbar = qbar @ net.weights[l]
        # adjoint of r_l = q_{l+1} * mask_l
        qbar = rbar * masks[l]
    grads.weights[-1][:, 0] += qbar.sum(axis=0)
    return value, grads


def _per_sample_param_grads(net, acts, masks, i):
    """Parameter gradient of D at sample i (dy = 1)."""
    g = NetGradients.zeros_like(net)
    abar = net.weights[-1][:, 0].copy()
    g.weights[-1][:, 0] = acts[-1][i]
    g.biases[-1][0] = 1.0
    for l in range(len(net.weights) - 2, -1, -1):
        zbar = abar * masks[l][i]
        g.weights[l] += np.outer(acts[l][i], zbar)
        g.biases[l] += zbar
        abar = net.weights[l] @ zbar
    return g


def _gp_params_value_and_grads(net, acts, masks, batch_size, want_grads):
    """mean ||grad_params D||^2 over the batch and its exact parameter
    gradient via forward-over-reverse Hessian-vector products."""
    nl = len(net.weights)
    value = 0.0
    total = NetGradients.zeros_like(net) if want_grads else None
    for i in range(batch_size):
        g = _per_sample_param_grads(net, acts, masks, i)
        value += sum(float(np.sum(a * a)) for a in g.weights + g.biases)
        if not want_grads:
            continue
        # tangent direction v = g (per-sample); propagate dots through the
        # forward pass then through the backward pass
        a_dot = np.zeros(net.layer_sizes[0])
        a_dots = [a_dot]
        for l in range(nl - 1):
            z_dot = net.weights[l].T @ a_dot + g.weights[l].T @ acts[l][i] + g.biases[l]
            a_dot = masks[l][i] * z_dot
            a_dots.append(a_dot)
        hvp = NetGradients.zeros_like(net)
        hvp.weights[-1][:, 0] = a_dots[-1]
        abar = net.weights[-1][:, 0]
        abar_dot = g.weights[-1][:, 0]
        for l in range(nl - 2, -1, -1):
            zbar = abar * masks[l][i]
            zbar_dot = abar_dot * masks[l][i]
            hvp.weights[l] += np.outer(a_dots[l], zbar) + np.outer(acts[l][i], zbar_dot)
            hvp.biases[l] += zbar_dot
            abar_dot = net.weights[l] @ zbar_dot + g.weights[l] @ zbar
            abar = net.weights[l] @ zbar
        for acc, h in zip(total.weights + total.biases, hvp.weights + hvp.biases):
            acc += 2.0 * h
    value /= batch_size
    if want_grads:
        for a in total.weights + total.biases:
            a /= batch_size
    return value, total


def _loss_and_grads(net, ref_batch, pol_batch, w_gp, penalty_mode, want_grads):
    if penalty_mode not in PENALTY_MODES:
        raise ValueError(f"penalty_mode must be one of {PENALTY_MODES}, got {penalty_mode!r}")
    ref, _ = _as_batch(ref_batch, net.layer_sizes[0])
    pol, _ = _as_batch(pol_batch, net.layer_sizes[0])
    if ref.shape[0] == 0 or pol.shape[0] == 0:
        raise ValueError("reference and policy batches must be non-empty")

    y_ref, acts_ref, masks_ref = _forward_full(net, ref)
    y_pol, acts_pol, masks_pol = _forward_full(net, pol)
    ref_term = float(np.mean((y_ref - 1.0) ** 2))
    pol_term = float(np.mean((y_pol + 1.0) ** 2))

    grads = NetGradients.zeros_like(net) if want_grads else None
    if want_grads:
        _backprop(net, acts_ref, masks_ref, (2.0 / ref.shape[0]) * (y_ref - 1.0), grads)
        _backprop(net, acts_pol, masks_pol, (2.0 / pol.shape[0]) * (y_pol + 1.0), grads)

    gp_term = 0.0
    if w_gp != 0.0:
        if penalty_mode == "input":
            gp_value, gp_grads = _gp_input_value_and_grads(net, masks_ref, ref.shape[0], want_grads)
        else:
            gp_value, gp_grads = _gp_params_value_and_grads(
                net, acts_ref, masks_ref, ref.shape[0], want_grads
            )
        gp_term = w_gp * gp_value
        if want_grads:
            for acc, g in zip(grads.weights + grads.biases, gp_grads.weights + gp_grads.biases):
                acc += w_gp * g

    loss = ref_term + pol_term + gp_term
    breakdown = {"reference": ref_term, "policy": pol_term, "gradient_penalty": gp_term}
    return loss, breakdown, grads


def lsgan_loss(net, ref_batch, pol_batch, w_gp, penalty_mode="input"):
    """Least-squares adversarial loss: mean (D-1)^2 over reference + mean
    (D+1)^2 over policy + w_gp * gradient penalty on the reference batch.

    ``penalty_mode`` selects the penalty reading: "input" penalizes
    ||grad_x D||^2 (the conventional stabilizer), "params" penalizes
    ||grad_params D||^2.  Returns (loss, per-term breakdown).
    """
    loss, breakdown, _ = _loss_and_grads(net, ref_batch, pol_batch, w_gp, penalty_mode, False)
    return loss, breakdown


def loss_gradient(net, ref_batch, pol_batch, w_gp, penalty_mode="input"):
    """Exact gradient of :func:`lsgan_loss` with respect to every weight and
    bias, including the second-order path through the gradient penalty."""
    _, _, grads = _loss_and_grads(net, ref_batch, pol_batch, w_gp, penalty_mode, True)
    return grads


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 64
    w_gp: float = 10.0
    seed: int = 0
    penalty_mode: str = "input"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.w_gp < 0:
            raise ValueError(f"w_gp must be >= 0, got {self.w_gp}")
        if self.penalty_mode not in PENALTY_MODES:
            raise ValueError(f"penalty_mode must be one of {PENALTY_MODES}")

    @classmethod
    def from_dict(cls, obj):
        known = {"learning_rate", "epochs", "batch_size", "w_gp", "seed", "penalty_mode"}
        return cls(**{k: obj[k] for k in obj if k in known})


DIVERGENCE_GUARD = 1e6


def train(net, ref_data, pol_data, config):
    """Fixed-rate gradient descent on the adversarial loss.

    One minibatch is drawn (uniformly, with replacement) from each dataset
    per epoch with a generator seeded from the config, so a run is
    bit-reproducible.  Returns (trained copy of the net, per-epoch loss).
    """
    ref = np.asarray(ref_data, dtype=float)
    pol = np.asarray(pol_data, dtype=float)
    if ref.ndim != 2 or pol.ndim != 2 or ref.shape[0] == 0 or pol.shape[0] == 0:
        raise ValueError("ref_data and pol_data must be non-empty 2-D arrays")
    if ref.shape[1] != pol.shape[1]:
        raise ValueError(
            f"dataset dimensions differ: reference {ref.shape[1]} vs policy {pol.shape[1]}"
        )
    if ref.shape[1] != net.layer_sizes[0]:
        raise ValueError(
            f"dataset dimension {ref.shape[1]} does not match network input {net.layer_sizes[0]}"
        )

    net = net.copy()
    rng = np.random.default_rng(config.seed)
    history = []
    for epoch in range(config.epochs):
        rb = ref[rng.integers(0, ref.shape[0], config.batch_size)]
        pb = pol[rng.integers(0, pol.shape[0], config.batch_size)]
        loss, _, grads = _loss_and_grads(net, rb, pb, config.w_gp, config.penalty_mode, True)
        if not np.isfinite(loss) or loss > DIVERGENCE_GUARD:
            raise TrainingDivergedError(f"loss {loss!r} exceeded {DIVERGENCE_GUARD:g} at epoch {epoch}")
        history.append(loss)
        for p, g in zip(net.weights + net.biases, grads.weights + grads.biases):
            p -= config.learning_rate * g
    return net, np.array(history)


# ---------------------------------------------------------------------------
# finite-difference verification
# ---------------------------------------------------------------------------

def _param_views(net):
    return net.weights + net.biases


def _numeric_gradient(net, ref, pol, w_gp, penalty_mode, step=1e-5):
    flat = []
    for arr in _param_views(net):
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            hi, _ = lsgan_loss(net, ref, pol, w_gp, penalty_mode)
            arr[idx] = orig - step
            lo, _ = lsgan_loss(net, ref, pol, w_gp, penalty_mode)
            arr[idx] = orig
            g[idx] = (hi - lo) / (2.0 * step)
            it.iternext()
        flat.append(g.ravel())
    return np.concatenate(flat)


def gradient_check(seed, trials=20, step=1e-5):
    """Compare :func:`loss_gradient` against central finite differences over
    every parameter of ``trials`` random small nets (batches of 4, gradient
    penalty active on most trials, both penalty readings exercised).

    Returns a report dict with the per-trial and maximum relative error
    (vector-norm ratio ||g_fd - g|| / max(||g_fd||, ||g||)).
    """
    rng = np.random.default_rng(seed)
    w_gp_cycle = (10.0, 0.5, 3.0, 0.0)
    results = []
    for t in range(trials):
        d0 = int(rng.integers(3, 8))
        h1 = int(rng.integers(4, 10))
        sizes = [d0, h1, 1] if t % 2 == 0 else [d0, h1, int(rng.integers(3, 7)), 1]
        net = DiscriminatorNet.initialize(sizes, seed=rng, leaky_slope=0.1)
        ref = rng.normal(size=(4, d0))
        pol = rng.normal(size=(4, d0))
        w_gp = w_gp_cycle[t % len(w_gp_cycle)]
        mode = "params" if t % 4 == 1 else "input"
        analytic = loss_gradient(net, ref, pol, w_gp, mode).flat()
        numeric = _numeric_gradient(net, ref, pol, w_gp, mode, step=step)
        denom = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-12)
        rel = float(np.linalg.norm(numeric - analytic) / denom)
        results.append({
            "trial": t,
            "layer_sizes": sizes,
            "w_gp": w_gp,
            "penalty_mode": mode,
            "rel_error": rel,
        })
    return {
        "seed": int(seed),
        "trials": trials,
        "step": step,
        "max_rel_error": max(r["rel_error"] for r in results),
        "results": results,
    }


# ---------------------------------------------------------------------------
# checkpoints and datasets
# ---------------------------------------------------------------------------

def save_checkpoint(net, path):
    """Write the net as JSON: layer sizes plus flat row-major weight arrays."""
    doc = {
        "layer_sizes": net.layer_sizes,
        "leaky_slope": net.leaky_slope,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    sizes = doc["layer_sizes"]
    weights = [
        np.array(w, dtype=float).reshape(din, dout)
        for w, din, dout in zip(doc["weights"], sizes[:-1], sizes[1:])
    ]
    biases = [np.array(b, dtype=float) for b in doc["biases"]]
    return DiscriminatorNet(weights=weights, biases=biases, leaky_slope=float(doc["leaky_slope"]))


def load_pair_dataset(path):
    """Read a line-delimited JSON dataset of state pairs ("s" and "s_next"
    arrays per line) into an (N, 2d) array."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if "s" not in obj or "s_next" not in obj:
                raise ValueError(f"{path}:{lineno}: expected fields 's' and 's_next'")
            s = np.asarray(obj["s"], dtype=float)
            s_next = np.asarray(obj["s_next"], dtype=float)
            if s.shape != s_next.shape:
                raise ValueError(f"{path}:{lineno}: 's' and 's_next' lengths differ")
            rows.append(np.concatenate([s, s_next]))
    if not rows:
        raise ValueError(f"{path}: dataset is empty")
    dims = {len(r) for r in rows}
    if len(dims) != 1:
        raise ValueError(f"{path}: inconsistent pair dimensions {sorted(dims)}")
    return np.array(rows)


def save_pair_dataset(pairs, path):
    pairs = np.asarray(pairs, dtype=float)
    half = pairs.shape[1] // 2
    with open(path, "w", encoding="utf-8") as fh:
        for row in pairs:
            fh.write(json.dumps({"s": row[:half].tolist(), "s_next": row[half:].tolist()}))
            fh.write("\n")
