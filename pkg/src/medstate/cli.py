"""Command-line front end: ``medstate synth | run | sweep``.

Exit codes: 0 success, 2 invalid input (config, manifest, EEGB files),
1 anything that fails while computing. Outputs are assembled in memory and
written only once everything succeeded, so a failed command leaves no
partial files behind.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .core import CohortDataset, SubjectData, get_band
from .csp import DEFAULT_ALPHAS, DEFAULT_PAIR_COUNTS
from .cv import CvMode, grid_sweep, run_experiment
from .dsp import bandpass
from .errors import FormatError, InvalidParams, MedStateError
from .formats import load_cohort, load_manifest, write_cohort
from .pipelines import PipelineKind
from .svdnn import DEFAULT_K_GRID
from .synth import SynthParams, generate_cohort

log = logging.getLogger("medstate")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


class ConfigError(MedStateError, ValueError):
    pass


@dataclass
class ExperimentConfig:
    pipeline: str = "CspLda"
    band: str | None = "HighGamma"
    mode: str = "intra"
    alpha: list = field(default_factory=lambda: [0.0])
    n_pairs: list = field(default_factory=lambda: [3])
    k: int | None = None
    k_grid: list = field(default_factory=lambda: list(DEFAULT_K_GRID))
    seed_cohort: int = 0
    seed_plan: int = 0
    seed_train: int = 0
    data_dir: str | None = None
    out_dir: str | None = None
    synth: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        try:
            self.pipeline = PipelineKind.parse(self.pipeline).value
            self.mode = "intra" if CvMode.parse(self.mode) is CvMode.INTRA else "inter"
            if self.band is not None and str(self.band).lower() != "none":
                self.band = get_band(self.band).name.value
            else:
                self.band = None
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        self.alpha = [float(a) for a in _as_list(self.alpha)]
        self.n_pairs = [int(n) for n in _as_list(self.n_pairs)]
        self.k_grid = [int(k) for k in _as_list(self.k_grid)]
        if any(a < 0 for a in self.alpha):
            raise ConfigError("alpha must be >= 0")
        if any(n < 1 for n in self.n_pairs) or any(k < 1 for k in self.k_grid):
            raise ConfigError("n_pairs and k_grid entries must be positive")
        for name in ("seed_cohort", "seed_plan", "seed_train"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ConfigError(f"{name} must be a non-negative integer")
        if not isinstance(self.synth, dict):
            raise ConfigError("synth must be an object")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        del d["data_dir"], d["out_dir"]
        return d


def _as_list(value) -> list:
    if value is None:
        return []
    if isinstance(value, str):
        return [v for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_ALIASES = {"pairs": "n_pairs", "data": "data_dir", "out": "out_dir"}


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    seeds = raw.pop("seeds", None) or {}
    for key in ("cohort", "plan", "train"):
        if key in seeds:
            raw.setdefault(f"seed_{key}", seeds[key])
    out = {}
    for key, value in raw.items():
        key = _ALIASES.get(key, key)
        if key not in _FIELDS:
            raise ConfigError(f"unknown config field {key!r}")
        out[key] = value
    return out


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file first, then every flag that was given on the command line."""
    values = load_config(args.config) if args.config else {}
    for name in ("pipeline", "band", "mode", "alpha", "n_pairs", "k", "k_grid", "seed_cohort",
                 "seed_plan", "seed_train", "data_dir", "out_dir"):
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    for name, key in (("subjects", "n_subjects"), ("minutes", "minutes_per_condition")):
        value = getattr(args, name, None)
        if value is not None:
            values.setdefault("synth", {})[key] = value
    if getattr(args, "command", None) == "sweep":
        values.setdefault("alpha", list(DEFAULT_ALPHAS))
        values.setdefault("n_pairs", list(DEFAULT_PAIR_COUNTS))
    try:
        return ExperimentConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _write_atomic(files: dict) -> None:
    """Write every (path -> text) pair via temp files, renaming only at the end."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag} is required")
    return value


def cmd_synth(cfg: ExperimentConfig) -> Path:
    out = Path(_require(cfg.out_dir, "--out"))
    try:
        params = SynthParams(**{**cfg.synth, "seed": cfg.seed_cohort,
                                "band": cfg.synth.get("band", cfg.band or "HighGamma")})
    except TypeError as exc:
        raise ConfigError(f"bad synth parameters: {exc}") from exc
    cohort = generate_cohort(params)
    with tempfile.TemporaryDirectory(dir=out.parent if out.parent.exists() else None) as tmp:
        write_cohort(cohort, tmp)
        out.mkdir(parents=True, exist_ok=True)
        for name in sorted(os.listdir(tmp)):
            os.replace(Path(tmp) / name, out / name)
    log.info("wrote %d subjects to %s", len(cohort), out)
    return out


def _load(cfg: ExperimentConfig) -> tuple[CohortDataset, str]:
    data = Path(_require(cfg.data_dir, "--data"))
    entries = load_manifest(data)
    digest = hashlib.sha256(json.dumps(entries, sort_keys=True).encode()).hexdigest()
    cohort = load_cohort(data)
    if cfg.band is not None:
        band = get_band(cfg.band)
        subjects = tuple(SubjectData(s.subject_id, tuple(bandpass(r, band) for r in s.recordings))
                         for s in cohort.subjects)
        cohort = CohortDataset(subjects, band)
    cohort.meta["seed_cohort"] = cfg.seed_cohort
    return cohort, digest


def _progress(msg: str) -> None:
    log.info(msg)


def cmd_run(cfg: ExperimentConfig) -> dict:
    out = Path(_require(cfg.out_dir, "--out"))
    if len(cfg.alpha) != 1 or len(cfg.n_pairs) != 1:
        raise ConfigError("run takes a single --alpha and --pairs value")
    cohort, digest = _load(cfg)
    kind = PipelineKind.parse(cfg.pipeline)
    hp: dict = {}
    if kind is PipelineKind.SVD_NN:
        if cfg.k is not None:
            hp["k"] = int(cfg.k)
    else:
        hp = {"alpha": cfg.alpha[0], "n_pairs": cfg.n_pairs[0]}
    report = run_experiment(cohort, kind, hp, cfg.mode, cfg.seed_plan, cfg.seed_train,
                            k_grid=tuple(cfg.k_grid), progress=_progress)
    doc = report.to_dict()
    doc["config"] = cfg.to_dict()
    doc["manifest_sha256"] = digest
    files = {out / "report.json": json.dumps(doc, indent=2, sort_keys=True) + "\n",
             out / "report.csv": report.to_csv()}
    _write_atomic(files)
    log.info("%s %s: %.2f ± %.2f", report.pipeline, report.mode, report.mean, report.sd)
    return doc


def cmd_sweep(cfg: ExperimentConfig) -> str:
    out = Path(_require(cfg.out_dir, "--out"))
    cohort, digest = _load(cfg)
    table = grid_sweep(cohort, cfg.alpha, cfg.n_pairs, cfg.mode, cfg.seed_plan, progress=_progress)
    doc = table.to_dict()
    doc["config"] = cfg.to_dict()
    doc["manifest_sha256"] = digest
    text = table.to_csv()
    _write_atomic({out / "sweep.csv": text,
                   out / "sweep.json": json.dumps(doc, indent=2, sort_keys=True) + "\n"})
    return text


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; flags override its values")
    common.add_argument("--pipeline", help="CspLda, CspLdaLstm or SvdNn")
    common.add_argument("--band", help="Alpha, Beta, LowGamma, HighGamma or none")
    common.add_argument("--mode", help="intra (10-fold per subject) or inter (leave-one-subject-out)")
    common.add_argument("--alpha", help="Tikhonov weight; comma list for sweep")
    common.add_argument("--pairs", dest="n_pairs", help="filter pairs; comma list for sweep")
    common.add_argument("--k", type=int, help="fixed SVD rank (skips k selection)")
    common.add_argument("--k-grid", dest="k_grid", help="comma list of candidate ranks")
    common.add_argument("--seed-cohort", dest="seed_cohort", type=int)
    common.add_argument("--seed-plan", dest="seed_plan", type=int)
    common.add_argument("--seed-train", dest="seed_train", type=int)
    common.add_argument("--data", dest="data_dir", help="directory holding manifest.json")
    common.add_argument("--out", dest="out_dir", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="medstate", description="Meditation-state EEG classification experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    synth = sub.add_parser("synth", parents=[common], help="write a synthetic cohort (EEGB + manifest)")
    synth.add_argument("--subjects", type=int, help="number of subjects")
    synth.add_argument("--minutes", type=float, help="minutes per condition")
    sub.add_parser("run", parents=[common], help="cross-validate one pipeline")
    sub.add_parser("sweep", parents=[common], help="CSP-LDA alpha x n_pairs grid")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    commands = {"synth": cmd_synth, "run": cmd_run, "sweep": cmd_sweep}
    try:
        cfg = build_config(args)
        commands[args.command](cfg)
    except (ConfigError, FormatError, InvalidParams) as exc:
        print(f"medstate: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        print(f"medstate: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
