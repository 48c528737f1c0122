"""Encoder-perturbation-decoder packing.

The encoder maps each one-hot index to a center through a tanh bottleneck
scaled by a learnable per-object vector alpha (kept inside the feasible
center set by projection, so containment holds by construction).  A random
perturbation supported on the small ball is added, and the decoder has to
classify the perturbed point back to its index.  Driving the summed
cross-entropy down forces the perturbation supports apart, which is exactly
a packing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .geometry import Container, Layout, PackingInstance, containment_excess, total_overlap
from .records import RunRecord, TraceRow

NET_SCHEMA = "packing-net/1"

DEFAULT_SCHEDULE = ((0, 2.0), (10000, 0.2))

# Containment/perturbation assertions run at snapshot epochs.
_CHECK_TOL = 1e-9


class NonFiniteLossError(RuntimeError):
    """Raised when a training step produces a non-finite loss or activations."""

    def __init__(self, epoch: int, detail: str):
        super().__init__(f"non-finite loss at epoch {epoch}: {detail}")
        self.epoch = epoch
        self.detail = detail


@dataclass(frozen=True)
class PerturbationSpec:
    """Radius of the perturbation support plus the exponent schedule.

    The schedule is a piecewise-constant map epoch -> p given as
    (start_epoch, p) pairs; large p concentrates draws near the center,
    small p near the boundary of the support.
    """

    radius: float
    schedule: tuple[tuple[int, float], ...] = DEFAULT_SCHEDULE

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"perturbation radius must be positive, got {self.radius}")
        if not self.schedule:
            raise ValueError("schedule must have at least one entry")
        starts = [int(s) for s, _ in self.schedule]
        if starts[0] != 0:
            raise ValueError("schedule must start at epoch 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("schedule start epochs must be strictly increasing")
        if any(p < 0 for _, p in self.schedule):
            raise ValueError("schedule exponents must be >= 0")


def scheduled_p(spec: PerturbationSpec, epoch: int) -> float:
    """p of the last schedule entry with start_epoch <= epoch."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    current = spec.schedule[0][1]
    for start, p in spec.schedule:
        if start <= epoch:
            current = p
        else:
            break
    return float(current)


@dataclass
class TrainConfig:
    """Training hyperparameters.

    optimizer "sgd" takes plain proportional gradient steps; "adam" is the
    bias-corrected adaptive update.  Plain steps are the default: the
    adaptive update normalizes the systematic (but tiny) gradient that
    leaks through perturbation tails into constant-speed outward drift,
    which strands every object on the container wall (a ring local optimum)
    on instances as small as seven circles.  learning_rate None resolves at
    train time to 0.01 * small_radius for sgd and 5e-4 for adam.
    """

    epochs: int = 20000
    learning_rate: float | None = None
    rng_seed: int = 0
    snapshot_every: int = 100
    encoder_hidden: tuple[int, ...] | None = None  # default (N, N)
    decoder_hidden: tuple[int, ...] | None = None  # default (N, N)
    perturb_draws: int = 1
    optimizer: str = "sgd"

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng seed must be a nonnegative integer")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.perturb_draws < 1:
            raise ValueError("perturb_draws must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def resolved_learning_rate(self, small_radius: float) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 5e-4 if self.optimizer == "adam" else 0.01 * small_radius


@dataclass
class PackerModel:
    """Encoder layers, per-object alpha vectors, and decoder layers."""

    instance: PackingInstance
    encoder: list[nn.DenseLayer]
    alpha: np.ndarray
    decoder: list[nn.DenseLayer]


def init_model(
    instance: PackingInstance, config: TrainConfig, rng: np.random.Generator
) -> PackerModel:
    """Xavier weights, zero biases, and alpha forming a compact interior blob.

    alpha coordinates start with magnitude uniform on [0.05, 0.3] times the
    center bound with random signs, so initial centers sit well inside the
    container.  Objects that end up interior in the final packing can only
    *keep* an interior seat they already hold (the decoder assigns vacated
    interior space to nobody, making re-entry prohibitively expensive), so
    everything starts interior and the packing grows outward from there.
    """
    n_obj = instance.count
    if n_obj < 1:
        raise ValueError("training requires count >= 1")
    dim = instance.container.dim
    enc_hidden = config.encoder_hidden or (n_obj, n_obj)
    dec_hidden = config.decoder_hidden or (n_obj, n_obj)

    encoder = []
    in_dim = n_obj
    for width in enc_hidden:
        encoder.append(nn.make_layer(in_dim, width, "selu", rng))
        in_dim = width
    encoder.append(nn.make_layer(in_dim, dim, "tanh", rng))

    bound = instance.center_bound
    magnitude = rng.uniform(0.05 * bound, 0.3 * bound, size=(n_obj, dim))
    signs = rng.integers(0, 2, size=(n_obj, dim)) * 2 - 1
    alpha = magnitude * signs

    decoder = []
    in_dim = dim
    for width in dec_hidden:
        decoder.append(nn.make_layer(in_dim, width, "relu", rng))
        in_dim = width
    decoder.append(nn.make_layer(in_dim, n_obj, "softmax", rng))

    model = PackerModel(instance, encoder, alpha, decoder)
    project_alpha(model)
    return model


def model_params(model: PackerModel) -> list[np.ndarray]:
    """Canonical parameter order: encoder (W, b) pairs, alpha, decoder pairs."""
    params: list[np.ndarray] = []
    for layer in model.encoder:
        params += [layer.weights, layer.bias]
    params.append(model.alpha)
    for layer in model.decoder:
        params += [layer.weights, layer.bias]
    return params


def project_alpha(model: PackerModel) -> None:
    """Clip each alpha row back into the feasible center set (in place)."""
    bound = model.instance.center_bound
    a = model.alpha
    if model.instance.container.kind == "box":
        np.clip(a, -bound, bound, out=a)
        return
    norms = np.linalg.norm(a, axis=1)
    over = norms > bound
    if np.any(over):
        a[over] *= (bound / norms[over])[:, None]


def encode_centers(model: PackerModel) -> np.ndarray:
    """Centers for the identity batch: c_i = tanh-bottleneck output * alpha_i."""
    eye = np.eye(model.instance.count)
    b, _ = nn.forward(model.encoder, eye)
    return b * model.alpha


def sample_perturbation(
    r: float, p: float, dim: int, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Draw W = r * Z^p * V/||V|| with V standard normal and Z uniform.

    The support is the ball of radius r; the radial law P(||W||/r <= u) is
    u^(1/p), so large p concentrates mass at the center.  V is drawn before
    Z, one batch each, which fixes the stream layout for reproducibility.
    """
    m = 1 if size is None else size
    v = rng.standard_normal((m, dim))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms == 0.0):  # probability-zero degenerate draw
        bad = norms == 0.0
        v[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(v, axis=1)
    z = rng.random(m)
    w = v * (r * z**p / norms)[:, None]
    return w[0] if size is None else w


def loss_and_grads(
    model: PackerModel, w: np.ndarray
) -> tuple[float, list[np.ndarray], np.ndarray, np.ndarray]:
    """Summed cross-entropy of the identity batch under perturbations w,
    with exact gradients in ``model_params`` order.

    w is a constant offset per step (p is a hyperparameter, not learned), so
    the perturbed center passes gradients through unchanged; alpha receives
    the bottleneck-weighted gradient and the encoder the alpha-weighted one.
    """
    n_obj = model.instance.count
    eye = np.eye(n_obj)
    b, enc_tape = nn.forward(model.encoder, eye)
    centers = b * model.alpha
    perturbed = centers + w
    preds, dec_tape = nn.forward(model.decoder, perturbed)
    loss = nn.cross_entropy(preds, eye)
    dec_grads, d_perturbed = nn.xent_backward(model.decoder, dec_tape, eye)
    d_alpha = d_perturbed * b
    d_b = d_perturbed * model.alpha
    enc_grads, _ = nn.backward(model.encoder, enc_tape, d_b)

    grads: list[np.ndarray] = []
    for dw, db in enc_grads:
        grads += [dw, db]
    grads.append(d_alpha)
    for dw, db in dec_grads:
        grads += [dw, db]
    return loss, grads, centers, perturbed


@dataclass
class SgdState:
    """Plain proportional gradient step; counterpart of nn.AdamState."""

    learning_rate: float
    t: int = 0


OptimizerState = nn.AdamState | SgdState


def make_optimizer(config: TrainConfig, model: PackerModel) -> OptimizerState:
    lr = config.resolved_learning_rate(model.instance.small_radius)
    if config.optimizer == "adam":
        return nn.init_adam(model_params(model), lr)
    return SgdState(learning_rate=lr)


def _apply_update(params: list[np.ndarray], grads: list[np.ndarray], opt: OptimizerState) -> None:
    if isinstance(opt, nn.AdamState):
        nn.adam_step(params, grads, opt)
        return
    opt.t += 1
    for p, g in zip(params, grads):
        p -= opt.learning_rate * g


def _epoch(
    model: PackerModel,
    opt: OptimizerState,
    pspec: PerturbationSpec,
    epoch: int,
    rng: np.random.Generator,
    draws: int = 1,
    check: bool = False,
) -> tuple[float, float, np.ndarray]:
    """One training pass; returns (pre-update loss, overlap length, centers)."""
    dim = model.instance.container.dim
    p = scheduled_p(pspec, epoch)
    loss_sum = 0.0
    grad_sum: list[np.ndarray] | None = None
    centers = None
    for _ in range(draws):
        w = sample_perturbation(pspec.radius, p, dim, rng, size=model.instance.count)
        try:
            loss, grads, centers, perturbed = loss_and_grads(model, w)
        except ValueError as exc:  # non-finite activations surface here
            raise NonFiniteLossError(epoch, str(exc)) from exc
        if not math.isfinite(loss):
            raise NonFiniteLossError(epoch, f"loss = {loss}")
        loss_sum += loss
        if grad_sum is None:
            grad_sum = grads
        else:
            for acc, g in zip(grad_sum, grads):
                acc += g
        if check:
            _check_snapshot(model, centers, perturbed)
    if draws > 1:
        for g in grad_sum:
            g /= draws
    loss_mean = loss_sum / draws

    layout = Layout(model.instance, centers)
    overlap = total_overlap(layout, "length")

    _apply_update(model_params(model), grad_sum, opt)
    project_alpha(model)
    return loss_mean, overlap, centers


def _check_snapshot(model: PackerModel, centers: np.ndarray, perturbed: np.ndarray) -> None:
    inst = model.instance
    excess = containment_excess(centers, inst.container, inst.small_radius)
    if excess > _CHECK_TOL:
        raise AssertionError(f"containment violated by {excess:.3e}")
    if inst.container.kind == "ball":
        worst = float(np.max(np.linalg.norm(perturbed, axis=1)))
        limit = inst.container.extent
    else:
        worst = float(np.max(np.abs(perturbed)))
        limit = inst.container.extent / 2.0
    if worst > limit + _CHECK_TOL:
        raise AssertionError(f"perturbed center leaves the container: {worst} > {limit}")
    a_norms = np.linalg.norm(model.alpha, axis=1)
    bound = inst.center_bound
    if inst.container.kind == "ball" and float(np.max(a_norms)) > bound * (1 + 1e-12):
        raise AssertionError("alpha norm constraint violated")
    if inst.container.kind == "box" and float(np.max(np.abs(model.alpha))) > bound * (1 + 1e-12):
        raise AssertionError("alpha box constraint violated")


def train_epoch(
    model: PackerModel,
    opt: OptimizerState,
    pspec: PerturbationSpec,
    epoch: int,
    rng: np.random.Generator,
    draws: int = 1,
) -> tuple[float, float]:
    """One full pass over the identity batch; updates all parameters and
    re-projects alpha.  Returns the pre-update loss and overlap length."""
    loss, overlap, _ = _epoch(model, opt, pspec, epoch, rng, draws=draws)
    return loss, overlap


def misclassification_rate(
    model: PackerModel, pspec: PerturbationSpec, p: float, rounds: int, rng: np.random.Generator
) -> float:
    """Fraction of perturbed centers whose decoded argmax is wrong, over
    ``rounds`` fresh perturbation draws of the whole batch."""
    centers = encode_centers(model)
    n_obj, dim = centers.shape
    wrong = 0
    for _ in range(rounds):
        w = sample_perturbation(pspec.radius, p, dim, rng, size=n_obj)
        preds, _ = nn.forward(model.decoder, centers + w)
        wrong += int(np.count_nonzero(np.argmax(preds, axis=1) != np.arange(n_obj)))
    return wrong / (rounds * n_obj)


def train(
    instance: PackingInstance,
    pspec: PerturbationSpec | None = None,
    config: TrainConfig | None = None,
) -> RunRecord:
    """Run the full training loop and return the persistable record.

    The trace holds one row per snapshot epoch (pre-update state) plus a
    final evaluation row; the best layout across every epoch is kept
    alongside the final one, since the stochastic loss does not improve the
    geometric objective monotonically.
    """
    config = config or TrainConfig()
    pspec = pspec or PerturbationSpec(radius=instance.small_radius)
    rng = np.random.default_rng(config.rng_seed)
    model = init_model(instance, config, rng)
    opt = make_optimizer(config, model)

    trace: list[TraceRow] = []
    best_overlap = math.inf
    best_centers = encode_centers(model)
    best_epoch = 0
    status, diagnostic = "ok", None

    epoch = 0
    try:
        for epoch in range(config.epochs):
            snapshot = epoch % config.snapshot_every == 0
            loss, overlap, centers = _epoch(
                model, opt, pspec, epoch, rng, draws=config.perturb_draws, check=snapshot
            )
            if snapshot:
                trace.append(TraceRow(epoch, loss, overlap, scheduled_p(pspec, epoch)))
            if overlap < best_overlap:
                best_overlap = overlap
                best_centers = centers.copy()
                best_epoch = epoch
    except NonFiniteLossError as exc:
        status, diagnostic = "aborted", str(exc)

    if status == "ok":
        # Final evaluation row: fresh draw against the trained network.
        p_final = scheduled_p(pspec, config.epochs)
        centers = encode_centers(model)
        w = sample_perturbation(
            pspec.radius, p_final, instance.container.dim, rng, size=instance.count
        )
        final_loss, _, _, _ = loss_and_grads(model, w)
        final_layout = Layout(instance, centers)
        final_overlap = total_overlap(final_layout, "length")
        trace.append(TraceRow(config.epochs, final_loss, final_overlap, p_final))
        if final_overlap < best_overlap:
            best_overlap = final_overlap
            best_centers = centers.copy()
            best_epoch = config.epochs
        final_centers = centers
        mis_rate = misclassification_rate(model, pspec, p_final, rounds=1000, rng=rng)
    else:
        final_centers = best_centers.copy()
        final_overlap = best_overlap if math.isfinite(best_overlap) else 0.0
        mis_rate = None

    best_layout = Layout(instance, best_centers)
    metrics = {
        "final_overlap_length": final_overlap,
        "best_overlap_length": total_overlap(best_layout, "length"),
        "best_overlap_measure": total_overlap(best_layout, "area_or_volume"),
        "misclassification_rate": mis_rate,
    }
    return RunRecord(
        method="packer",
        instance=instance,
        config={
            "epochs": config.epochs,
            "optimizer": config.optimizer,
            "learning_rate": config.resolved_learning_rate(instance.small_radius),
            "seed": config.rng_seed,
            "snapshot_every": config.snapshot_every,
            "encoder_hidden": list(config.encoder_hidden) if config.encoder_hidden else None,
            "decoder_hidden": list(config.decoder_hidden) if config.decoder_hidden else None,
            "perturb_draws": config.perturb_draws,
            "perturbation_radius": pspec.radius,
            "schedule": [[int(s), float(p)] for s, p in pspec.schedule],
        },
        seed=config.rng_seed,
        trace=trace,
        final_centers=np.asarray(final_centers, dtype=np.float64),
        best_centers=np.asarray(best_centers, dtype=np.float64),
        best_epoch=best_epoch,
        metrics=metrics,
        status=status,
        diagnostic=diagnostic,
    )


def save_checkpoint(
    path: str | Path,
    model: PackerModel,
    opt: OptimizerState,
    rng: np.random.Generator,
    epoch: int,
) -> None:
    """Serialize the full training state, including the RNG stream position,
    so a resumed run is bit-identical to an uninterrupted one."""
    inst = model.instance
    if isinstance(opt, nn.AdamState):
        opt_doc = {"kind": "adam", **nn.adam_to_dict(opt)}
    else:
        opt_doc = {"kind": "sgd", "learning_rate": opt.learning_rate, "t": opt.t}
    doc = {
        "schema": NET_SCHEMA,
        "epoch": epoch,
        "instance": {
            "container": {
                "kind": inst.container.kind,
                "dim": inst.container.dim,
                "extent": inst.container.extent,
            },
            "count": inst.count,
            "small_radius": inst.small_radius,
        },
        "encoder": [nn.layer_to_dict(layer) for layer in model.encoder],
        "alpha": model.alpha.tolist(),
        "decoder": [nn.layer_to_dict(layer) for layer in model.decoder],
        "optimizer": opt_doc,
        "rng_state": rng.bit_generator.state,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_checkpoint(
    path: str | Path,
) -> tuple[PackerModel, OptimizerState, np.random.Generator, int]:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != NET_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema {doc.get('schema')!r}")
    inst_doc = doc["instance"]
    cont = inst_doc["container"]
    instance = PackingInstance(
        container=Container(cont["kind"], int(cont["dim"]), float(cont["extent"])),
        count=int(inst_doc["count"]),
        small_radius=float(inst_doc["small_radius"]),
    )
    model = PackerModel(
        instance=instance,
        encoder=[nn.layer_from_dict(d) for d in doc["encoder"]],
        alpha=np.asarray(doc["alpha"], dtype=np.float64),
        decoder=[nn.layer_from_dict(d) for d in doc["decoder"]],
    )
    opt_doc = doc["optimizer"]
    opt: OptimizerState
    if opt_doc["kind"] == "adam":
        opt = nn.adam_from_dict(opt_doc)
    else:
        opt = SgdState(learning_rate=float(opt_doc["learning_rate"]), t=int(opt_doc["t"]))
    rng = np.random.default_rng(0)
    rng.bit_generator.state = doc["rng_state"]
    return model, opt, rng, int(doc["epoch"])
