import math
from dataclasses import dataclass, field

from joblib import Parallel, delayed

from analysis.weighted_logrank import weighted_logrank
from analysis.weights import UnitWeight
from utils.error_handler import InputError, StatisticalError, Unreachable
from utils.logging_setup import setup_logging
from utils.random_streams import chunk_indices
from .scenarios import ScenarioSpec
from .trial_simulator import TrialDesign, simulate_trial

logger = setup_logging('calibration')


@dataclass(frozen=True)
class PowerProbe:
    d: int
    power: float
    mc_se: float
    errors: int = 0


@dataclass
class CalibrationResult:
    d: int
    power: float
    mc_se: float
    probes: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'd': self.d,
            'power': self.power,
            'mc_se': self.mc_se,
            'probes': [vars(p) for p in self.probes],
            'monotonicity_violations': [[a.d, b.d] for a, b in self.violations],
        }


def _rejections(scenario, design, alpha, seed, indices) -> tuple:
    rejected = 0
    errors = 0
    for rep in indices:
        # the replicate stream does not depend on d, so probes share their trials
        trial = simulate_trial(scenario, design, seed, rep)
        try:
            p = weighted_logrank(trial.sample, UnitWeight()).p_one_sided
        except StatisticalError:
            errors += 1
            continue
        rejected += p <= alpha
    return rejected, errors


class EventCalibrator:
    def __init__(self, settings: dict = None):
        settings = settings or {}
        self.n_jobs = int(settings.get('threads', 1))

    def power(self, scenario: ScenarioSpec, design: TrialDesign, alpha: float,
              reps: int, seed: int) -> PowerProbe:
        """Estimated one-sided log-rank power of `design`."""
        chunks = chunk_indices(reps, self.n_jobs * 4 if self.n_jobs > 1 else 1)
        if self.n_jobs > 1:
            tallies = Parallel(n_jobs=self.n_jobs)(
                delayed(_rejections)(scenario, design, alpha, seed, chunk) for chunk in chunks
            )
        else:
            tallies = [_rejections(scenario, design, alpha, seed, chunk) for chunk in chunks]
        rejected = sum(t[0] for t in tallies)
        errors = sum(t[1] for t in tallies)
        power = rejected / reps
        return PowerProbe(d=design.target_events, power=power,
                          mc_se=math.sqrt(power * (1 - power) / reps), errors=errors)

    def calibrate(self, scenario: ScenarioSpec, design_template: TrialDesign, target_power: float,
                  alpha: float, reps: int, seed: int) -> CalibrationResult:
        """Smallest event count whose estimated log-rank power reaches `target_power`."""
        if not 0 <= target_power < 1:
            raise InputError(f"target power must lie in [0, 1), got {target_power}", field='power')
        if not 0 < alpha < 1:
            raise InputError(f"alpha must lie in (0, 1), got {alpha}", field='alpha')
        if reps < 1:
            raise InputError("reps must be >= 1", field='reps')

        probes = {}

        def probe(d: int) -> PowerProbe:
            if d not in probes:
                probes[d] = self.power(scenario, design_template.with_events(d), alpha, reps, seed)
                logger.info(f"Probe d={d}: power {probes[d].power:.4f} (SE {probes[d].mc_se:.4f})")
            return probes[d]

        n_total = design_template.n_total
        if probe(n_total).power < target_power:
            raise Unreachable(f"power {probes[n_total].power:.3f} at d = n_total = {n_total} "
                              f"is below the target {target_power}")
        lo, hi = 1, n_total
        if probe(lo).power >= target_power:
            hi = lo
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if probe(mid).power >= target_power:
                hi = mid
            else:
                lo = mid

        ordered = [probes[d] for d in sorted(probes)]
        violations = [(a, b) for a, b in zip(ordered, ordered[1:])
                      if a.power - b.power > 2 * max(a.mc_se, b.mc_se)]
        for a, b in violations:
            logger.warning(f"Power not monotone: d={a.d} ({a.power:.4f}) > d={b.d} ({b.power:.4f})")

        best = probes[hi]
        logger.info(f"Calibrated d = {hi} with power {best.power:.4f}")
        return CalibrationResult(d=hi, power=best.power, mc_se=best.mc_se,
                                 probes=ordered, violations=violations)


def calibrate_events(scenario: ScenarioSpec, design_template: TrialDesign, target_power: float,
                     alpha: float, reps: int, seed: int, settings: dict = None) -> CalibrationResult:
    return EventCalibrator(settings).calibrate(scenario, design_template, target_power,
                                               alpha, reps, seed)
