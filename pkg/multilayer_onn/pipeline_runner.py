# multilayer_onn/pipeline_runner.py
# Purpose: Orchestrate simulator commands end to end inside a run directory

"""
Module: pipeline_runner.py
Purpose: Run one CLI command (prepare-data, train, compile-mask, calibrate, infer, energy-scan,
reproduce) against a validated RunConfig, writing every artifact, the effective config, a
Prometheus exposition and a status report into a fresh timestamped run directory.
"""

import json
import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from multilayer_onn.calibration.alignment import AlignmentObjective, optimize_weight_shifts
from multilayer_onn.calibration.measurement import (
    CalibrationMap,
    exclude_neurons,
    load_calibration,
    measure_weight_response,
    save_calibration,
    transfer_weights,
)
from multilayer_onn.calibration.system import SimulatedSystem
from multilayer_onn.config.schema import RunConfig, apply_overrides, dump_config
from multilayer_onn.config.settings import Settings
from multilayer_onn.datasets.dataset import LabeledDataset, save_dataset_csv, split_dataset
from multilayer_onn.datasets.mnist import load_mnist_idx, prepare_mnist
from multilayer_onn.datasets.spiral import SPIRAL_CLASSES, spiral_dataset
from multilayer_onn.electronics.circuit import settle_check
from multilayer_onn.energy.scaling import (
    diffraction_array_limit,
    min_power_table,
    perf_vs_clock_table,
    perf_vs_grid_table,
    readin_table,
    write_table,
)
from multilayer_onn.errors import ConfigIOError, ConfigurationError, InvalidArgumentError, OnnError
from multilayer_onn.geometry.crosstalk import overlap_crosstalk
from multilayer_onn.geometry.layout import StageGeometry, default_stage_geometries
from multilayer_onn.geometry.mask_io import load_shift_map, save_mask, save_shift_map
from multilayer_onn.network.checkpoint import load_checkpoint, save_checkpoint, write_confusion_csv, write_loss_curve_csv
from multilayer_onn.network.evaluation import evaluate, linear_baseline
from multilayer_onn.network.model import (
    HardwareNetwork,
    NoisyFidelity,
    attach_raytraced_optics,
    compile_network_masks,
)
from multilayer_onn.network.training import TrainConfig, train as train_network
from multilayer_onn.utils.logger import generate_request_id, get_logger, log_run_summary
from multilayer_onn.utils.metrics import metrics_collector
from multilayer_onn.utils.seeding import STREAM_CALIBRATION, derive_rng

INCOMPLETE_MARKER = "INCOMPLETE"
# Calibration reads use small stream keys; injected hardware variability sits above them.
HARDWARE_STREAM_BASE = 1000


@dataclass
class RunOutcome:
    """Where a run wrote its artifacts and what it measured."""

    run_id: str
    run_dir: str
    command: str
    status: str
    metrics: Dict[str, Any] = field(default_factory=dict)


def _utc_compact() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def make_run_dir(output_dir: str, command: str) -> str:
    """Allocate a fresh, never reused run directory under output_dir."""
    for attempt in range(10000):
        run_dir = os.path.join(output_dir, f"{command}_{_utc_compact()}_{attempt:04d}")
        if os.path.exists(run_dir):
            continue
        os.makedirs(run_dir)
        return run_dir
    raise ConfigIOError(f"Unable to allocate a fresh run directory under {output_dir}")


class ExperimentRunner:
    """
    Orchestrates the simulator commands.
    """

    def __init__(self, cfg: RunConfig, run_id: Optional[str] = None) -> None:
        """
        Initialize the ExperimentRunner with a validated configuration.

        Args:
            cfg (RunConfig): Effective configuration (flags already applied).
            run_id (Optional[str]): Run ID for log records; generated when omitted.
        """
        self.logger = get_logger(__name__)
        self.cfg = cfg
        self.settings = Settings()
        self.settings.data_dir = cfg.paths.data_dir
        self.settings.threads = cfg.threads
        self.run_id = run_id or generate_request_id()
        self.run_dir: Optional[str] = None
        self.metrics: Dict[str, Any] = {}
        self._data: Dict[str, Tuple[LabeledDataset, LabeledDataset]] = {}
        self._systems: Dict[int, SimulatedSystem] = {}
        self._shifts: Optional[List[np.ndarray]] = None

    # run bookkeeping

    def run(self, command: str, target: Optional[str] = None) -> RunOutcome:
        """
        Execute one command in a new run directory.

        Args:
            command (str): One of the CLI commands.
            target (Optional[str]): 'mnist' or 'spiral'; defaults to the config's target.

        Returns:
            RunOutcome: Run directory and recorded metrics.

        Raises:
            OnnError: Any module error, after the failure report has been written.
        """
        handlers: Dict[str, Callable[[str], None]] = {
            "prepare-data": self.prepare_data,
            "train": self.train,
            "compile-mask": self.compile_masks,
            "calibrate": self.calibrate,
            "infer": self.infer,
            "energy-scan": self.energy_scan,
            "reproduce": self.reproduce,
        }
        if command not in handlers:
            raise InvalidArgumentError(f"Unknown command '{command}'", module="cli")
        target = target or self.cfg.target
        self.cfg = apply_overrides(self.cfg, {"command": command, "target": target})

        start = time.time()
        metrics_collector.record_run_start()
        self.run_dir = make_run_dir(self.cfg.output_dir, command)
        self._touch(INCOMPLETE_MARKER)
        dump_config(self.cfg, self._path("effective_config.yaml"))
        self.logger.info("Starting run", extra={"request_id": self.run_id, "command": command, "target": target, "run_dir": self.run_dir})

        try:
            handlers[command](target)
        except Exception as e:
            duration = time.time() - start
            report = e.to_report() if isinstance(e, OnnError) else {
                "module": "cli", "error": type(e).__name__, "message": str(e), "context": {},
            }
            metrics_collector.record_run_failure(command, report["module"])
            self._write_status("failure", command, duration, error=report)
            self._write_metrics()
            self.logger.error("Run failed: %s", report["message"], extra={"request_id": self.run_id, "error_report": report})
            log_run_summary(command, duration, "failure", self.run_dir, self.run_id)
            raise

        duration = time.time() - start
        metrics_collector.record_run_success(command)
        metrics_collector.record_stage(command, duration)
        self._write_status("success", command, duration)
        self._write_metrics()
        os.remove(self._path(INCOMPLETE_MARKER))
        log_run_summary(command, duration, "success", self.run_dir, self.run_id)
        return RunOutcome(self.run_id, self.run_dir, command, "success", dict(self.metrics))

    def _path(self, *parts: str) -> str:
        path = os.path.join(self.run_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def _touch(self, name: str) -> None:
        with open(self._path(name), "w", encoding="utf-8") as f:
            f.write(self.run_id + "\n")

    def _write_status(self, status: str, command: str, duration: float, error: Optional[Dict[str, Any]] = None) -> None:
        doc = {
            "status": status,
            "command": command,
            "target": self.cfg.target,
            "run_id": self.run_id,
            "duration_s": duration,
            "metrics": self.metrics,
        }
        if error is not None:
            doc["error"] = error
        with open(self._path("status.json"), "w", encoding="utf-8") as f:
            json.dump(doc, f, ensure_ascii=False, indent=2, default=str)

    def _write_metrics(self) -> None:
        with open(self._path("metrics.prom"), "wb") as f:
            f.write(metrics_collector.exposition())
        if self.metrics:
            frame = pd.DataFrame({"metric": list(self.metrics), "value": list(self.metrics.values())})
            frame.to_csv(self._path("metrics.csv"), index=False)

    # shared building blocks

    def datasets(self, target: str) -> Tuple[LabeledDataset, LabeledDataset]:
        """(train, test) for a target, loaded once per runner."""
        if target not in self._data:
            if target == "spiral":
                s = self.cfg.spiral
                full = spiral_dataset(s.per_class, s.noise_sigma, s.turns, seed=self.cfg.seed)
                self._data[target] = split_dataset(full, self.cfg.seed)
            else:
                parts = []
                for split in ("train", "t10k"):
                    paths = self.settings.mnist_paths(split)
                    if paths is None:
                        raise ConfigIOError(
                            f"MNIST '{split}' IDX files not found in {self.settings.data_dir}",
                            path=self.settings.data_dir,
                        )
                    parts.append(prepare_mnist(load_mnist_idx(*paths)))
                # Both official files are pooled and re-split 5:1 like the spiral set.
                full = LabeledDataset(
                    np.vstack([p.inputs for p in parts]),
                    np.concatenate([p.labels for p in parts]),
                    parts[0].n_classes,
                )
                self._data[target] = split_dataset(full, self.cfg.seed)
        return self._data[target]

    def build_network(self, target: str) -> HardwareNetwork:
        n = self.cfg.network
        n_in, n_classes = (2, SPIRAL_CLASSES) if target == "spiral" else (64, 10)
        return HardwareNetwork.build(
            n_in=n_in, hidden=tuple(n.hidden), n_out=n.n_out, n_classes=n_classes,
            w_min=n.w_min, w_max=n.w_max, seed=self.cfg.seed, led_curve=self.cfg.circuit.to_led_curve(),
        )

    def train_config(self, target: str) -> TrainConfig:
        tc = self.cfg.train.to_train_config(self.cfg.seed, self.cfg.geometry.guard)
        if target == "spiral":
            s = self.cfg.spiral
            tc = replace(tc, epochs=s.epochs, batch_size=s.batch_size, learning_rate=s.learning_rate, learn_offsets=s.learn_offsets)
        return tc

    def geometries_for(self, net: HardwareNetwork) -> Optional[List[StageGeometry]]:
        """Physical stages when the network has the 64-50-50-64 hardware shape, else None."""
        geoms = default_stage_geometries(self.cfg.geometry.d1, self.cfg.geometry.d2)
        if [(g.n_in, g.n_out) for g in geoms] != [(l.n_in, l.n_out) for l in net.layers]:
            return None
        return geoms

    def _require_geometries(self, net: HardwareNetwork) -> List[StageGeometry]:
        geoms = self.geometries_for(net)
        if geoms is None:
            shapes = [(l.n_in, l.n_out) for l in net.layers]
            raise ConfigurationError(f"No physical stage layout for layer shapes {shapes}")
        return geoms

    def noisy_fidelity(self, net: HardwareNetwork) -> NoisyFidelity:
        """Noisy level with geometric crosstalk normalized to the aligned own-detector overlap."""
        crosstalk = None
        geoms = self.geometries_for(net)
        if self.cfg.noise.crosstalk and geoms is not None:
            crosstalk = []
            for geom in geoms:
                C = overlap_crosstalk(geom, (0.0, 0.0), guard=self.cfg.geometry.guard)
                crosstalk.append(C / float(np.mean(np.diag(C))))
        return NoisyFidelity(
            noise=self.cfg.noise.to_noise_spec(self.cfg.seed),
            crosstalk=crosstalk,
            offset_sigma=self.cfg.noise.offset_sigma,
        )

    def simulated_system(self, k: int, geom: StageGeometry) -> SimulatedSystem:
        """Stage k of the simulated hardware with seeded injected variability."""
        if k not in self._systems:
            c = self.cfg.calibration
            rng = derive_rng(self.cfg.seed, STREAM_CALIBRATION, HARDWARE_STREAM_BASE + k)
            n, p = geom.n_in, geom.n_out
            self._systems[k] = SimulatedSystem(
                geometry=geom,
                weight_gain=np.clip(rng.normal(1.0, c.gain_sigma, size=(n, p)), 0.05, None),
                extinction=np.full((n, p), c.extinction),
                neuron_gain=np.clip(rng.normal(1.0, c.neuron_gain_sigma, size=p // 2), 0.05, None),
                neuron_offset=rng.normal(0.0, c.neuron_offset_sigma, size=p // 2),
                misalignment=tuple(c.misalignment),
                probe_noise_sigma=c.probe_noise_sigma,
                mode=c.mode,
                rays_per_led=c.rays_per_led,
                guard=self.cfg.geometry.guard,
                led_curve=self.cfg.circuit.to_led_curve(),
            )
        return self._systems[k]

    def hardware_network(
        self,
        net: HardwareNetwork,
        calibrations: Optional[List[CalibrationMap]] = None,
        shifts: Optional[List[np.ndarray]] = None,
    ) -> HardwareNetwork:
        """
        The network as the simulated hardware executes it.

        Weights become effective transmissions g * (e + (1 - e) * w) routed through the spot
        coupling of the (misaligned, then shifted) windows; neurons take the injected gains and
        offsets. With calibration maps the weights are first pre-compensated and excluded
        neurons are switched off.
        """
        geoms = self._require_geometries(net)
        hw = net.copy()
        for k, (layer, geom) in enumerate(zip(hw.layers, geoms)):
            system = self.simulated_system(k, geom)
            weights = layer.weights
            if calibrations is not None:
                weights = transfer_weights(weights, calibrations[k], layer.w_max, self.cfg.calibration.anchor)
                layer.usable = calibrations[k].usable.copy()
            coupling = system.coupling(None if shifts is None else shifts[k])
            layer.weights = np.einsum("ij,ijk->ik", system.transmission(weights), coupling)
            layer.gains = system.neuron_gain.copy()
            layer.offsets = layer.offsets + system.neuron_offset
        return hw

    def load_network(self) -> HardwareNetwork:
        if not self.cfg.paths.checkpoint:
            raise ConfigurationError(f"Command '{self.cfg.command}' needs paths.checkpoint")
        net, _ = load_checkpoint(self.cfg.paths.checkpoint)
        return net

    def load_calibrations(self, n_layers: int) -> Optional[List[CalibrationMap]]:
        folder = self.cfg.paths.calibration_dir
        if not folder:
            return None
        return [load_calibration(os.path.join(folder, f"stage_{k}.json")) for k in range(n_layers)]

    def load_shifts(self, n_layers: int) -> Optional[List[np.ndarray]]:
        """Alignment shift maps saved by a calibrate run, when every stage has one."""
        if self._shifts is not None:
            return self._shifts
        folder = self.cfg.paths.calibration_dir
        if not folder:
            return None
        paths = [os.path.join(folder, f"stage_{k}.shifts.json") for k in range(n_layers)]
        if not all(os.path.exists(path) for path in paths):
            return None
        self._shifts = [load_shift_map(path) for path in paths]
        return self._shifts

    # commands

    def prepare_data(self, target: str) -> None:
        """Write the preprocessed train/test splits as CSV."""
        train_set, test_set = self.datasets(target)
        save_dataset_csv(train_set, self._path("data", "train.csv"))
        save_dataset_csv(test_set, self._path("data", "test.csv"))
        self.metrics.update({"n_train": len(train_set), "n_test": len(test_set), "input_dim": train_set.dim})

    def train(self, target: str) -> HardwareNetwork:
        """Train, checkpoint, and score the network and a linear baseline on the test split."""
        train_set, test_set = self.datasets(target)
        net = self.build_network(target)
        geoms = self.geometries_for(net)
        result = train_network(train_set, net, self.train_config(target), test=test_set, geometries=geoms, run_id=self.run_id)
        save_checkpoint(result.net, self._path("checkpoint.json"), metadata={"target": target, "seed": self.cfg.seed, "run_id": self.run_id})
        write_loss_curve_csv(result.loss_curve, self._path("loss_curve.csv"))
        scored = evaluate(result.net, test_set, "algebraic", run_id=self.run_id)
        write_confusion_csv(scored.confusion, self._path("confusion_algebraic.csv"))
        self.metrics["accuracy_algebraic"] = scored.accuracy
        self.metrics["linear_baseline_accuracy"] = linear_baseline(train_set, seed=self.cfg.seed, test=test_set)
        if result.loss_curve:
            self.metrics["final_loss"] = result.loss_curve[-1]["loss"]
        return result.net

    def compile_masks(
        self,
        target: str,
        net: Optional[HardwareNetwork] = None,
        shifts: Optional[List[np.ndarray]] = None,
        folder: str = "masks",
    ) -> list:
        """
        Rasterize every stage and save PGM + JSON sidecars under `folder`.

        Shift maps (given, or found in paths.calibration_dir) move the windows and are written
        next to each sidecar.
        """
        net = net or self.load_network()
        geoms = self._require_geometries(net)
        if shifts is None:
            shifts = self.load_shifts(len(net.layers))
        masks = compile_network_masks(net, geoms, self.cfg.geometry.guard, shifts)
        for k, (mask, geom) in enumerate(zip(masks, geoms)):
            pgm, _ = save_mask(mask, geom, self._path(folder, f"stage_{k}.pgm"), metadata={"stage": k, "run_id": self.run_id})
            if shifts is not None:
                save_shift_map(shifts[k], pgm)
        self.metrics["masks_written"] = len(masks)
        return masks

    def calibrate(self, target: str, net: Optional[HardwareNetwork] = None) -> List[CalibrationMap]:
        """
        Align, probe and exclude every stage of the simulated hardware.

        Windows are aligned first and probed at their shifted positions. The shift maps are kept
        beside calibration/stage_k.json and, with a network at hand, the masks are rasterized
        again at the aligned positions under masks_aligned/ and the pre-compensated weights are
        saved as checkpoint_calibrated.json.
        """
        if net is None and self.cfg.paths.checkpoint:
            net = self.load_network()
        c = self.cfg.calibration
        geoms = self._require_geometries(net) if net is not None else default_stage_geometries(self.cfg.geometry.d1, self.cfg.geometry.d2)
        calibrations = []
        shifts = []
        for k, geom in enumerate(geoms):
            system = self.simulated_system(k, geom)
            stage_shifts = None
            if c.align:
                aligned = optimize_weight_shifts(
                    system, objective=AlignmentObjective(c.crosstalk_weight), max_shift=c.max_shift,
                    seed=self.cfg.seed, run_id=self.run_id,
                )
                stage_shifts = aligned.shifts
                shifts.append(stage_shifts)
                self.metrics[f"alignment_gain_stage_{k}"] = aligned.trace[-1] - aligned.trace[0]
            cal = measure_weight_response(
                system, seed=self.cfg.seed, threads=self.cfg.threads, run_id=self.run_id, shifts=stage_shifts,
            )
            if k < len(geoms) - 1:
                cal.usable = exclude_neurons(cal, c.gain_tolerance, c.offset_tolerance)
            path = save_calibration(cal, self._path("calibration", f"stage_{k}.json"), metadata={"stage": k, "run_id": self.run_id})
            if stage_shifts is not None:
                save_shift_map(stage_shifts, path)
            self.metrics[f"usable_neurons_stage_{k}"] = int(cal.usable.sum())
            calibrations.append(cal)
        self._shifts = shifts if c.align else None
        if net is not None and self._shifts is not None:
            self.compile_masks(target, net, self._shifts, folder="masks_aligned")
        if net is not None:
            calibrated = net.copy()
            for layer, cal in zip(calibrated.layers, calibrations):
                layer.weights = transfer_weights(layer.weights, cal, layer.w_max, c.anchor)
                layer.usable = cal.usable.copy()
            save_checkpoint(calibrated, self._path("checkpoint_calibrated.json"), metadata={"calibrated": True, "run_id": self.run_id})
        return calibrations

    def infer(self, target: str, net: Optional[HardwareNetwork] = None, calibrations: Optional[List[CalibrationMap]] = None) -> None:
        """Score the test split at every configured fidelity, and on the simulated hardware when it exists."""
        net = net or self.load_network()
        _, test_set = self.datasets(target)
        geoms = self.geometries_for(net)
        if calibrations is None:
            calibrations = self.load_calibrations(len(net.layers))

        for fidelity in self.cfg.network.fidelities:
            noisy = None
            model = net
            if fidelity == "raytraced":
                if geoms is None:
                    self.logger.warning("Skipping raytraced fidelity: no physical layout", extra={"request_id": self.run_id})
                    continue
                masks = compile_network_masks(net, geoms, self.cfg.geometry.guard)
                model = attach_raytraced_optics(net.copy(), geoms, masks, self.cfg.network.rays_per_led, self.cfg.seed, self.cfg.threads)
            elif fidelity == "noisy":
                noisy = self.noisy_fidelity(net)
            scored = evaluate(model, test_set, fidelity, seed=self.cfg.seed, noisy=noisy, run_id=self.run_id)
            write_confusion_csv(scored.confusion, self._path(f"confusion_{fidelity}.csv"))
            self.metrics[f"accuracy_{fidelity}"] = scored.accuracy
            for k, r in enumerate(scored.correlations):
                self.metrics[f"correlation_layer_{k}_{fidelity}"] = r

        if geoms is not None:
            self.metrics["accuracy_hardware_uncalibrated"] = evaluate(self.hardware_network(net), test_set, run_id=self.run_id).accuracy
            if calibrations is not None:
                hw = self.hardware_network(net, calibrations, self.load_shifts(len(net.layers)))
                self.metrics["accuracy_hardware_calibrated"] = evaluate(hw, test_set, run_id=self.run_id).accuracy

        settle = settle_check(self.cfg.energy.clock_hz, self.cfg.circuit.bandwidth_hz, self.cfg.circuit.settle_tolerance)
        self.metrics["settle_residual"] = settle.residual
        if not settle.settled:
            self.logger.warning("Neuron circuit does not settle within half a clock period", extra={"residual": settle.residual})

    def energy_scan(self, target: str) -> None:
        """Scaling tables, and the diffraction sweep when enabled."""
        e = self.cfg.energy
        model = e.to_energy_model()
        tables = {
            "ops_per_readin.csv": readin_table(e.grid_sizes, e.layer_counts, model),
            "perf_vs_grid.csv": perf_vs_grid_table(e.grid_sizes, model),
            "perf_vs_clock.csv": perf_vs_clock_table(e.clocks, 32, model),
            "min_optical_power.csv": min_power_table(e.bandwidths, self.cfg.noise.to_noise_spec(self.cfg.seed), e.snr_target),
        }
        for name, frame in tables.items():
            write_table(frame, self._path("energy", name))
        by_grid = tables["perf_vs_grid.csv"].set_index("grid_size")["ops_per_w"]
        for n in (8, 32):
            if n in by_grid.index:
                self.metrics[f"ops_per_w_{n}x{n}"] = float(by_grid.loc[n])
        if self.cfg.diffraction.enabled:
            limit = diffraction_array_limit(self.cfg.diffraction.to_sweep(), self.cfg.seed, self.cfg.threads, self.run_id)
            write_table(limit.curve, self._path("energy", "diffraction_leakage.csv"))
            self.metrics["diffraction_limit"] = limit.limit

    def reproduce(self, target: str) -> None:
        """
        Full pipeline. MNIST: train, compile masks, calibrate, then infer at every fidelity
        and on the simulated hardware. Spiral: train with learned offsets and infer.
        """
        net = self.train(target)
        if target == "spiral":
            self.infer(target, net)
            return
        self.compile_masks(target, net)
        calibrations = self.calibrate(target, net)
        self.infer(target, net, calibrations)
