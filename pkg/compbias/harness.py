"""
Sweep runner: one training run per mapping under a single shared configuration.

Every run of a sweep starts from the same seeded initialization and sees the
same input vectors, so differences in convergence time come from the labels
alone. Runs are independent and may be fanned out over worker processes;
results are always returned ordered by mapping_id.
"""
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .common.errors import DegenerateInput, InputMismatch, NonFiniteLoss
from .common.utils import get_logger
from .datagen import IMAGE_SIZE, MIN_IMAGE_SIZE, PROJECTION_DIM, Dataset, Encoding, build_dataset
from .grammar_coding import cl
from .mapping_core import AttributeSpace, Mapping, MappingKind, classify, enumerate_mappings
from .metrics import LearningCurve, convergence_time, pearson, permutation_p_value, topsim
from .nn_engine import (
    HIDDEN_WIDTH,
    NUM_HIDDEN,
    Activation,
    DenseNet,
    LossKind,
    OptimizerKind,
    backward,
    evaluate_loss,
    fit,
    init,
    make_optimizer,
    true_label_log_probs,
)

logger = get_logger(__name__)

DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_WEIGHT_DECAY = 5e-4
DEFAULT_EPOCHS = 1000
DEFAULT_ACTIVATION = Activation.TANH
DEFAULT_PROBE_LR = 1e-3
PROGRESS_EVERY = 32

# reference Pearson rho (CL, topsim) against convergence time for the MLP settings
REFERENCE_RHO: Dict[Tuple[Encoding, OptimizerKind, LossKind], Tuple[float, float]] = {
    (Encoding.OHT2, OptimizerKind.SGD, LossKind.CE): (0.6475, -0.7101),
    (Encoding.OHT2, OptimizerKind.SGD, LossKind.L2): (0.5793, -0.7817),
    (Encoding.OHT2, OptimizerKind.ADAM, LossKind.CE): (0.6598, -0.5731),
    (Encoding.OHT2, OptimizerKind.ADAM, LossKind.L2): (0.5378, -0.7223),
    (Encoding.OHT3, OptimizerKind.SGD, LossKind.CE): (0.5976, -0.7963),
    (Encoding.OHT3, OptimizerKind.SGD, LossKind.L2): (0.6386, -0.7311),
    (Encoding.OHT3, OptimizerKind.ADAM, LossKind.CE): (0.5672, -0.6418),
    (Encoding.OHT3, OptimizerKind.ADAM, LossKind.L2): (0.5582, -0.7026),
    (Encoding.IMAGE, OptimizerKind.SGD, LossKind.CE): (0.6866, -0.5911),
    (Encoding.IMAGE, OptimizerKind.SGD, LossKind.L2): (0.5932, -0.6057),
    (Encoding.IMAGE, OptimizerKind.ADAM, LossKind.CE): (0.5403, -0.6720),
    (Encoding.IMAGE, OptimizerKind.ADAM, LossKind.L2): (0.4433, -0.6585),
}


class ExperimentConfig(BaseModel):
    """Hyper-parameters shared by every run of a sweep, network initialization included."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    encoding: Encoding = Encoding.OHT2
    loss: LossKind = LossKind.CE
    optimizer: OptimizerKind = OptimizerKind.SGD
    learning_rate: float = Field(DEFAULT_LEARNING_RATE, gt=0)
    weight_decay: float = Field(DEFAULT_WEIGHT_DECAY, ge=0)
    epochs: int = Field(DEFAULT_EPOCHS, gt=0)
    seed: int = Field(0, ge=0)
    image_size: int = Field(IMAGE_SIZE, ge=MIN_IMAGE_SIZE)
    projection_dim: int = Field(PROJECTION_DIM, ge=1)
    activation: Activation = DEFAULT_ACTIVATION
    hidden_width: int = Field(HIDDEN_WIDTH, ge=1)


class RunResult(BaseModel):
    mapping_id: int
    kind: MappingKind
    image_size: int
    table: str
    cl_bits: float
    topsim: float
    convergence_time: float
    final_loss: float
    diverged: bool = False
    epochs_completed: int
    input_digest: str
    run_seed: int
    # absent when a result is re-read from runs.csv without curves.csv
    curve: Optional[LearningCurve] = None

    @model_validator(mode="after")
    def _check_curve(self):
        if self.curve is None:
            return self
        if self.curve.epochs != self.epochs_completed:
            raise ValueError("epochs_completed must match the curve length")
        if self.curve.losses and not math.isclose(
                self.convergence_time, convergence_time(self.curve), rel_tol=0.0, abs_tol=1e-9):
            raise ValueError("convergence_time must be the area under the curve")
        if not self.diverged and not math.isfinite(self.final_loss):
            raise ValueError("a converged run needs a finite final loss")
        return self


class InfluenceReport(BaseModel):
    probe_example: int
    deltas: Tuple[Tuple[float, ...], ...] = Field(..., description="rows are examples, columns are heads")
    alignment_score: float


class CorrelationMetric(str, Enum):
    CL = "cl"
    TOPSIM = "topsim"


class CorrelationReport(BaseModel):
    metric: CorrelationMetric
    rho: float
    p_analytic: float
    p_permutation: float
    n: int
    excluded: int


class AlignmentSummary(BaseModel):
    seeds: Tuple[int, ...]
    compositional: float
    holistic: float

    @property
    def difference(self) -> float:
        return self.compositional - self.holistic


class GridRow(BaseModel):
    encoding: Encoding
    optimizer: OptimizerKind
    loss: LossKind
    cl: CorrelationReport
    topsim: CorrelationReport
    reference_cl_rho: Optional[float] = None
    reference_topsim_rho: Optional[float] = None


def run_seed(seed: int, mapping_id: int) -> int:
    """Per-run 64-bit seed derived from the experiment seed and the mapping."""
    state = np.random.SeedSequence([seed, mapping_id]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _dataset(mapping: Mapping, config: ExperimentConfig) -> Dataset:
    return build_dataset(mapping, config.encoding, config.seed, config.projection_dim, config.image_size)


def _fresh_net(config: ExperimentConfig, dataset: Dataset, space: AttributeSpace) -> DenseNet:
    return init(
        config.seed,
        input_dim=dataset.inputs.shape[1],
        hidden_width=config.hidden_width,
        num_hidden=NUM_HIDDEN,
        num_heads=space.num_attributes,
        num_classes=space.values_per_attribute,
        activation=config.activation,
    )


def input_digest(inputs: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(inputs).tobytes()).hexdigest()[:16]


def train_run(mapping: Mapping, config: ExperimentConfig) -> RunResult:
    """Train one freshly initialized network on one mapping's dataset."""
    dataset = _dataset(mapping, config)
    net = _fresh_net(config, dataset, mapping.space)
    state = make_optimizer(config.optimizer, net.params, config.learning_rate, config.weight_decay)

    diverged = False
    try:
        losses = fit(net, dataset.inputs, dataset.labels, config.loss, state, config.epochs)
        final_loss = evaluate_loss(net, dataset.inputs, dataset.labels, config.loss)
        if not math.isfinite(final_loss):
            diverged = True
    except NonFiniteLoss as exc:
        losses = exc.losses
        final_loss = float("nan")
        diverged = True

    curve = LearningCurve(losses=losses)
    return RunResult(
        mapping_id=mapping.mapping_id,
        kind=classify(mapping).kind,
        image_size=mapping.image_size,
        table=mapping.table_string(),
        cl_bits=cl(mapping),
        topsim=topsim(mapping),
        convergence_time=convergence_time(curve) if losses else float("nan"),
        final_loss=final_loss,
        diverged=diverged,
        epochs_completed=curve.epochs,
        input_digest=input_digest(dataset.inputs),
        run_seed=run_seed(config.seed, mapping.mapping_id),
        curve=curve,
    )


def _train_by_id(config: ExperimentConfig, mapping_id: int) -> RunResult:
    return train_run(Mapping.from_id(AttributeSpace.toy256(), mapping_id), config)


def run_sweep(config: ExperimentConfig, mapping_ids: Optional[Iterable[int]] = None,
              workers: int = 1) -> List[RunResult]:
    """
    Train one run per Toy256 mapping (or per id in ``mapping_ids``).

    Diverged runs are kept and flagged; the sweep itself never fails on them.
    """
    space = AttributeSpace.toy256()
    total = space.num_objects ** space.num_objects
    ids = sorted(set(mapping_ids)) if mapping_ids is not None else list(range(total))
    logger.info("Sweep of %d runs: %s", len(ids), config.model_dump(mode="json"))

    results: List[RunResult] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_train_by_id, config, i) for i in ids]
            for done, future in enumerate(as_completed(futures), start=1):
                results.append(future.result())
                _progress(done, len(ids))
    else:
        for done, mapping_id in enumerate(ids, start=1):
            results.append(_train_by_id(config, mapping_id))
            _progress(done, len(ids))
    results.sort(key=lambda r: r.mapping_id)

    digests = {r.input_digest for r in results}
    if len(digests) > 1:
        raise InputMismatch(f"runs saw {len(digests)} different input matrices")

    diverged = [r.mapping_id for r in results if r.diverged]
    if diverged:
        logger.warning("%d runs diverged: %s", len(diverged), diverged)
    logger.info("Sweep finished")
    return results


def _progress(done: int, total: int):
    if done % PROGRESS_EVERY == 0 or done == total:
        logger.info("Progress: %d/%d runs", done, total)


# ---------- influence probe ----------

def influence_probe(mapping: Mapping, config: ExperimentConfig, probe_example: Optional[int] = None,
                    step_lr: float = DEFAULT_PROBE_LR) -> InfluenceReport:
    """
    One plain gradient step on a single example from a fresh seeded network, and
    the change it causes in every example's log-probability of its true label.
    The probe example is drawn from the run seed when not given.
    """
    dataset = _dataset(mapping, config)
    n = mapping.space.num_objects
    if probe_example is None:
        rng = np.random.default_rng(run_seed(config.seed, mapping.mapping_id))
        probe_example = int(rng.integers(n))
    if not 0 <= probe_example < n:
        raise ValueError(f"probe_example must lie in [0, {n}), got {probe_example}")

    net = _fresh_net(config, dataset, mapping.space)
    before = true_label_log_probs(net, dataset.inputs, dataset.labels)
    probe = slice(probe_example, probe_example + 1)
    grads = backward(net, dataset.inputs[probe], dataset.labels[probe], config.loss)
    for name, g in grads.items():
        net.params[name] -= step_lr * g
    after = true_label_log_probs(net, dataset.inputs, dataset.labels)

    deltas = after - before
    off_probe = np.delete(deltas, probe_example, axis=0)
    return InfluenceReport(
        probe_example=probe_example,
        deltas=tuple(tuple(float(d) for d in row) for row in deltas),
        alignment_score=float(off_probe.mean()),
    )


def alignment_score(mapping: Mapping, config: ExperimentConfig, step_lr: float = DEFAULT_PROBE_LR) -> float:
    """Off-probe mean delta averaged over every choice of probe example."""
    scores = [
        influence_probe(mapping, config, probe, step_lr).alignment_score
        for probe in range(mapping.space.num_objects)
    ]
    return float(np.mean(scores))


def alignment_by_class(config: ExperimentConfig, seeds: Sequence[int],
                       step_lr: float = DEFAULT_PROBE_LR) -> AlignmentSummary:
    """Mean alignment over the compositional and the holistic Toy256 bijections, over ``seeds``."""
    space = AttributeSpace.toy256()
    bijections = [m for m in enumerate_mappings(space) if m.is_bijection]
    by_kind: Dict[MappingKind, List[float]] = {MappingKind.COMPOSITIONAL: [], MappingKind.HOLISTIC: []}
    for seed in seeds:
        seeded = config.model_copy(update={"seed": seed})
        for mapping in bijections:
            by_kind[classify(mapping).kind].append(alignment_score(mapping, seeded, step_lr))
    return AlignmentSummary(
        seeds=tuple(seeds),
        compositional=float(np.mean(by_kind[MappingKind.COMPOSITIONAL])),
        holistic=float(np.mean(by_kind[MappingKind.HOLISTIC])),
    )


# ---------- correlations ----------

def _metric_value(result: RunResult, metric: CorrelationMetric) -> float:
    return result.cl_bits if metric is CorrelationMetric.CL else result.topsim


def correlate_sweep(results: Sequence[RunResult], x_metric: CorrelationMetric,
                    shuffles: int = 10_000, seed: int = 0) -> CorrelationReport:
    """Pearson of a mapping metric against convergence time; diverged runs are left out and counted."""
    metric = CorrelationMetric(x_metric)
    kept = [
        r for r in results
        if not r.diverged and math.isfinite(r.convergence_time) and math.isfinite(_metric_value(r, metric))
    ]
    excluded = len(results) - len(kept)
    if excluded:
        logger.warning("Excluding %d diverged runs from the %s correlation", excluded, metric.value)
    if len(kept) < 3:
        raise DegenerateInput(f"need at least 3 usable runs, got {len(kept)}")

    xs = [_metric_value(r, metric) for r in kept]
    ys = [r.convergence_time for r in kept]
    rho, p = pearson(xs, ys)
    return CorrelationReport(
        metric=metric,
        rho=rho,
        p_analytic=p,
        p_permutation=permutation_p_value(xs, ys, shuffles=shuffles, seed=seed),
        n=len(kept),
        excluded=excluded,
    )


def default_grid_settings() -> List[Tuple[Encoding, OptimizerKind, LossKind]]:
    return list(REFERENCE_RHO)


def run_grid(base: ExperimentConfig, settings: Optional[Sequence[Tuple[Encoding, OptimizerKind, LossKind]]] = None,
             workers: int = 1, mapping_ids: Optional[Iterable[int]] = None) -> List[GridRow]:
    """Both correlations for every (encoding, optimizer, loss) setting, next to the reference values."""
    rows = []
    ids = list(mapping_ids) if mapping_ids is not None else None
    for encoding, optimizer, loss in settings or default_grid_settings():
        config = base.model_copy(update={"encoding": Encoding(encoding), "optimizer": OptimizerKind(optimizer),
                                         "loss": LossKind(loss)})
        results = run_sweep(config, mapping_ids=ids, workers=workers)
        reference = REFERENCE_RHO.get((config.encoding, config.optimizer, config.loss), (None, None))
        rows.append(GridRow(
            encoding=config.encoding,
            optimizer=config.optimizer,
            loss=config.loss,
            cl=correlate_sweep(results, CorrelationMetric.CL, seed=config.seed),
            topsim=correlate_sweep(results, CorrelationMetric.TOPSIM, seed=config.seed),
            reference_cl_rho=reference[0],
            reference_topsim_rho=reference[1],
        ))
    return rows
