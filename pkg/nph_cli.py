import sys
import os
sys.path.append(os.path.abspath(os.path.dirname(__file__)))

import argparse
import json
import math
from dataclasses import fields, replace

import pandas as pd

from analysis.max_combo import MaxComboSpec, lin_combo, maxcombo_test, two_step_combo
from analysis.ph_pretest import TIME_TRANSFORMS, gt_test
from analysis.two_step import (Mode, TieRule, TwoStepConfig, naive_two_step, permutation_two_step,
                               run_two_step, spec_to_dict)
from analysis.weighted_logrank import weighted_logrank
from analysis.weights import FlemingHarrington, Modest, UnitWeight, is_unit_equivalent
from simulation.calibration import calibrate_events
from simulation.scenarios import REFERENCE_SCENARIOS, SCENARIO_TYPES, scenario_to_dict
from simulation.study_config import load_study_config, standard_methods
from simulation.study_runner import export_conditional_pvalues, run_study
from simulation.trial_simulator import (RECRUITMENT_DAYS, EventCount, EventFraction, TrialDesign,
                                        recruitment_months, simulate_trial)
from utils.config_loader import load_settings
from utils.data_utils import STUDY_COLUMNS, load_sample_csv, save_trial_csv, trial_frame
from utils.error_handler import EXIT_OK, ErrorHandler, InputError, NphError, StatisticalError
from utils.logging_setup import setup_logging

logger = setup_logging('nph_cli')

SCHEMA_VERSION = 1

# CLI flag -> scenario field
SCENARIO_FLAGS = {
    'mc': 'median_control',
    'mt': 'median_treatment',
    'delay': 'delay',
    'median_post': 'median_post',
    'prevalence': 'prevalence',
    'median_subgroup': 'median_subgroup',
    'median_complement': 'median_complement',
    'median_progression': 'median_progression',
    'median_post_progression': 'median_post_progression',
    'median': 'median',
}


def _clean(value):
    """JSON-safe copy: NaN becomes null."""
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, 'tolist'):
        return _clean(value.tolist())
    return value


def emit(payload: dict, as_json: bool, text: str) -> None:
    if as_json:
        payload = {'schema_version': SCHEMA_VERSION, **payload}
        print(json.dumps(_clean(payload), indent=2, sort_keys=True))
    else:
        print(text)


def resolve_seed(args, settings: dict) -> int:
    if args.seed is not None:
        return args.seed
    print(f"Using default seed {settings['seed']}", file=sys.stderr)
    return settings['seed']


# --- tests on external data -------------------------------------------------

def weight_from_args(method: str, args):
    if method == 'logrank':
        return UnitWeight()
    if method == 'fh':
        if args.rho is None or args.gamma is None:
            raise InputError("--rho and --gamma are required for FH weights", field='rho/gamma')
        return FlemingHarrington(args.rho, args.gamma)
    if method == 'modest':
        if args.t_star is None:
            raise InputError("--t-star is required for modest weights", field='t_star')
        return Modest(args.t_star)
    raise InputError(f"unknown weight method {method!r}", field='method')


def wlrt_report(sample, spec) -> tuple:
    result = weighted_logrank(sample, spec)
    # FH(0,0) and Modest(0) are the log-rank test and are reported as such
    method = UnitWeight().label if is_unit_equivalent(spec) else spec.label
    payload = {'method': method, 'spec': spec_to_dict(spec), 'z': result.z,
               'p_one_sided': result.p_one_sided, 'p_two_sided': result.p_two_sided}
    shown = spec.label if method == spec.label else f"{spec.label} (= {method})"
    text = (f"{shown:<22} z = {result.z:9.4f}   p(one-sided) = {result.p_one_sided:.6f}   "
            f"p(two-sided) = {result.p_two_sided:.6f}")
    return payload, text


def maxcombo_report(sample, spec: MaxComboSpec) -> tuple:
    result = maxcombo_test(sample, spec)
    payload = {'method': spec.label, 'spec': spec_to_dict(spec), 'z_max': result.z_max,
               'argmax': spec.components[result.argmax].label, 'z_oriented': result.z_oriented,
               'p_one_sided': result.p_adjusted, 'p_two_sided': None, 'corr': result.corr}
    text = (f"{spec.label:<22} z_max = {result.z_max:7.4f} ({spec.components[result.argmax].label})   "
            f"p(adjusted, one-sided) = {result.p_adjusted:.6f}")
    return payload, text


def gt_report(sample, time_transform: str) -> tuple:
    result = gt_test(sample, time_transform)
    payload = {'method': 'GT', 'statistic': result.statistic, 'p_pre': result.p_pre,
               'beta': result.beta, 'd': result.d, 'time_transform': time_transform}
    text = (f"{'GT (' + time_transform + ')':<22} chi2 = {result.statistic:8.4f}   "
            f"p(two-sided) = {result.p_pre:.6f}   beta = {result.beta:.4f}")
    return payload, text


def cmd_test(args, settings: dict) -> int:
    sample = load_sample_csv(args.input)
    draws = args.mvn_draws or settings['mvn_draws']
    if args.method == 'maxcombo':
        payload, text = maxcombo_report(sample, lin_combo(draws, args.mvn_seed))
    elif args.method == 'gt':
        payload, text = gt_report(sample, args.time_transform)
    elif args.method == 'all':
        payload, text = panel_report(sample, args, settings, draws)
    else:
        payload, text = wlrt_report(sample, weight_from_args(args.method, args))
    emit({'command': 'test', **payload}, args.json, text)
    return EXIT_OK


def panel_report(sample, args, settings: dict, draws: int) -> tuple:
    """Every standard method on one data set: conventional and two-step p-values."""
    lines = []
    results = []
    try:
        payload, text = gt_report(sample, args.time_transform)
        results.append(payload)
        lines.append(text)
    except StatisticalError as e:
        lines.append(f"GT pre-test failed: {e}")

    seed = resolve_seed(args, settings) if args.permutations else None
    for method in standard_methods(alpha_pre=args.alpha_pre, mvn_draws=draws, naive=True,
                                permutation=False):
        try:
            if not method.is_two_step:
                test = method.test
                if isinstance(test, MaxComboSpec):
                    test = replace(test, mvn_seed=args.mvn_seed)
                    payload, text = maxcombo_report(sample, test)
                else:
                    payload, text = wlrt_report(sample, test)
                payload['id'] = method.id
            else:
                config = method.two_step
                if isinstance(config.alternative, MaxComboSpec):
                    config = replace(config, alternative=replace(config.alternative, mvn_seed=args.mvn_seed))
                nts = naive_two_step(sample, config)
                payload = {'id': method.id, 'alpha_pre': config.alpha_pre, 'branch': nts.branch.value,
                           'p_nts': nts.p_final}
                text = f"{method.id:<22} branch = {nts.branch.value:<3}   p(nTS) = {nts.p_final:.6f}"
                if args.permutations:
                    config = replace(config, m=args.permutations, seed=seed)
                    pts = permutation_two_step(sample, config, n_jobs=args.threads or settings['threads'])
                    payload['p_pts'] = pts.p_final
                    text += f"   p(pTS, m={config.m}) = {pts.p_final:.6f}"
        except StatisticalError as e:
            payload = {'id': method.id, 'error': f"{type(e).__name__}: {e}"}
            text = f"{method.id:<22} failed: {e}"
        results.append(payload)
        lines.append(text)
    return {'method': 'all', 'results': results}, "\n".join(lines)


def alternative_from_args(args, settings: dict):
    if args.alternative == 'maxcombo':
        return two_step_combo(args.mvn_draws or settings['mvn_draws'], args.mvn_seed)
    return weight_from_args(args.alternative, args)


def cmd_twostep(args, settings: dict) -> int:
    sample = load_sample_csv(args.input)
    mode = Mode(args.mode)
    seed = resolve_seed(args, settings) if mode is Mode.PERMUTATION else (args.seed or 0)
    config = TwoStepConfig(
        alternative_from_args(args, settings),
        alpha_pre=args.alpha_pre,
        alpha=args.alpha,
        m=args.permutations or settings['permutations'],
        seed=seed,
        tie_rule=TieRule(args.tie_rule),
        time_transform=args.time_transform,
    )
    result = run_two_step(sample, config, mode, n_jobs=args.threads or settings['threads'])
    payload = {'command': 'twostep', 'mode': mode.value, 'alternative': config.alternative.label,
               'alternative_spec': spec_to_dict(config.alternative),
               'alpha': config.alpha, 'alpha_pre': config.alpha_pre, 'seed': config.seed,
               'tie_rule': config.tie_rule.value, **result.to_dict()}
    if mode is Mode.NAIVE:
        payload['m'] = None
    text = (f"pre-test p = {result.p_pre:.6f} -> {result.branch.value} branch "
            f"({'log-rank' if result.branch.value == 'PH' else config.alternative.label})\n"
            f"p0 = {result.p0:.6f}\n"
            f"{mode.value} two-step p = {result.p_final:.6f}"
            + (f" ({result.exceed_count}/{result.m} permutations)" if result.exceed_count is not None else '')
            + f"\nreject at alpha = {config.alpha}: {'yes' if result.reject else 'no'}")
    emit(payload, args.json, text)
    return EXIT_OK


# --- simulation --------------------------------------------------------------

def scenario_from_args(args):
    name = args.scenario
    if name in REFERENCE_SCENARIOS:
        scenario = REFERENCE_SCENARIOS[name]
    elif name in SCENARIO_TYPES:
        scenario = SCENARIO_TYPES[name]()
    else:
        raise InputError(f"unknown scenario {name!r}", field='scenario')

    allowed = {f.name for f in fields(scenario)}
    overrides = {}
    for flag, field_name in SCENARIO_FLAGS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if field_name not in allowed:
            raise InputError(f"--{flag.replace('_', '-')} does not apply to the {scenario.kind} scenario",
                             field=flag)
        overrides[field_name] = value
    scenario = replace(scenario, **overrides)
    if args.hr is not None:
        scenario = scenario.with_hr(args.hr)
    return scenario


def design_from_args(args, settings: dict, scenario, require_stop: bool = True) -> TrialDesign:
    if args.recruitment_months is not None:
        window = args.recruitment_months
    else:
        window = recruitment_months(args.recruitment, settings['days_per_month'])
    if args.events is not None:
        stop = EventCount(args.events)
    elif args.event_fraction is not None:
        stop = EventFraction(args.event_fraction)
    elif scenario.kind == 'null':
        stop = EventFraction(0.75)
    elif require_stop:
        raise InputError("--events or --event-fraction is required", field='events')
    else:
        stop = EventCount(args.n)
    return TrialDesign(args.n, window, stop)


def cmd_simulate(args, settings: dict) -> int:
    scenario = scenario_from_args(args)
    design = design_from_args(args, settings, scenario)
    seed = resolve_seed(args, settings)
    trial = simulate_trial(scenario, design, seed)
    logger.info(f"Simulated {scenario.kind} trial: {len(trial.sample)} subjects, "
                f"{trial.sample.n_events} events, cutoff {trial.cutoff:.3f} months")
    if args.output:
        save_trial_csv(trial, args.output)
    else:
        sys.stdout.write(trial_frame(trial).to_csv(index=False, lineterminator='\n'))
    return EXIT_OK


def cmd_calibrate(args, settings: dict) -> int:
    scenario = scenario_from_args(args)
    design = design_from_args(args, settings, scenario, require_stop=False)
    seed = resolve_seed(args, settings)
    result = calibrate_events(scenario, design, args.power, args.alpha, args.reps, seed,
                              settings={'threads': args.threads or settings['threads']})
    payload = {'command': 'calibrate', 'scenario': scenario_to_dict(scenario), 'n_total': design.n_total,
               'recruitment_window': design.recruitment_window, 'target_power': args.power,
               'alpha': args.alpha, 'reps': args.reps, 'seed': seed, **result.to_dict()}
    text = (f"calibrated events d = {result.d}\n"
            f"estimated log-rank power = {result.power:.4f} (MC SE {result.mc_se:.4f}, {args.reps} replicates)")
    emit(payload, args.json, text)
    return EXIT_OK


def cmd_study(args, settings: dict) -> int:
    config = load_study_config(args.config, settings['days_per_month'])
    threads = args.threads or settings['threads']
    if args.output and not args.resume and os.path.exists(args.output):
        os.remove(args.output)
    rows = run_study(config, args.output, resume=args.resume, settings={'threads': threads})
    logger.info(f"Study finished: {len(rows)} rows")

    if args.conditional_output:
        methods = {m.id: m for m in config.methods}
        if args.conditional_method not in methods or not methods[args.conditional_method].is_two_step:
            raise InputError("--conditional-method must name a two-step method of the study",
                             field='conditional_method')
        if not 0 <= args.conditional_cell < len(config.cells):
            raise InputError("--conditional-cell is out of range", field='conditional_cell')
        frame = export_conditional_pvalues(config.cells[args.conditional_cell],
                                           methods[args.conditional_method], config.n_reps,
                                           config.base_seed, args.conditional_cell)
        frame.to_csv(args.conditional_output, index=False, encoding='utf-8', lineterminator='\n')

    if not args.output:
        frame = pd.DataFrame([r.to_record() for r in rows], columns=list(STUDY_COLUMNS))
        sys.stdout.write(frame.to_csv(index=False, lineterminator='\n'))
    return EXIT_OK


# --- argument parsing -----------------------------------------------------------

def _add_weight_flags(parser) -> None:
    parser.add_argument("--rho", type=float, help="FH rho")
    parser.add_argument("--gamma", type=float, help="FH gamma")
    parser.add_argument("--t-star", dest="t_star", type=float, help="Modest weight t* (months)")
    parser.add_argument("--mvn-draws", type=int, help="Points for the max-combo normal integral")
    parser.add_argument("--mvn-seed", type=int, default=0, help="Seed of the max-combo normal integral")
    parser.add_argument("--time-transform", choices=TIME_TRANSFORMS, default='km',
                        help="Time axis of the PH pre-test")
    parser.add_argument("--json", action="store_true", help="Machine-readable output")


def _add_scenario_flags(parser) -> None:
    names = sorted(set(SCENARIO_TYPES) | set(REFERENCE_SCENARIOS))
    parser.add_argument("--scenario", required=True, choices=names)
    for flag in SCENARIO_FLAGS:
        parser.add_argument("--" + flag.replace('_', '-'), dest=flag, type=float)
    parser.add_argument("--hr", type=float, help="Hazard ratio of the treatment side")
    parser.add_argument("--n", type=int, default=400, help="Total sample size (even)")
    parser.add_argument("--recruitment", choices=sorted(RECRUITMENT_DAYS), default='medium')
    parser.add_argument("--recruitment-months", type=float, help="Recruitment window in months")
    parser.add_argument("--events", type=int, help="Stop after this many events")
    parser.add_argument("--event-fraction", type=float, help="Stop after this share of subjects had an event")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nph_cli", description="Weighted log-rank, max-combo and two-step tests under non-proportional hazards")
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="Run a conventional test on a CSV data set")
    p_test.add_argument("--input", required=True, help="CSV with columns time,event,group")
    p_test.add_argument("--method", required=True, choices=['logrank', 'fh', 'modest', 'maxcombo', 'gt', 'all'])
    p_test.add_argument("--alpha-pre", type=float, default=0.2, help="Pre-test level for --method all")
    p_test.add_argument("--permutations", type=int, default=0, help="pTS permutations for --method all")
    p_test.add_argument("--seed", type=int)
    p_test.add_argument("--threads", type=int)
    _add_weight_flags(p_test)
    p_test.set_defaults(handler=cmd_test)

    p_two = sub.add_parser("twostep", help="Naive or permutation two-step test on a CSV data set")
    p_two.add_argument("--input", required=True)
    p_two.add_argument("--alternative", required=True, choices=['fh', 'modest', 'maxcombo'])
    p_two.add_argument("--alpha", type=float, default=0.025, help="One-sided level")
    p_two.add_argument("--alpha-pre", type=float, default=0.2, help="Two-sided pre-test level")
    p_two.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.NAIVE.value)
    p_two.add_argument("--permutations", type=int)
    p_two.add_argument("--tie-rule", choices=[t.value for t in TieRule], default=TieRule.COUNT_LE.value)
    p_two.add_argument("--seed", type=int)
    p_two.add_argument("--threads", type=int)
    _add_weight_flags(p_two)
    p_two.set_defaults(handler=cmd_twostep)

    p_sim = sub.add_parser("simulate", help="Simulate one trial and write it as CSV")
    _add_scenario_flags(p_sim)
    p_sim.add_argument("--output", help="CSV path (default: stdout)")
    p_sim.set_defaults(handler=cmd_simulate)

    p_cal = sub.add_parser("calibrate", help="Event count giving the target log-rank power")
    _add_scenario_flags(p_cal)
    p_cal.add_argument("--power", type=float, default=0.8)
    p_cal.add_argument("--alpha", type=float, default=0.025)
    p_cal.add_argument("--reps", type=int, default=1000)
    p_cal.add_argument("--json", action="store_true")
    p_cal.set_defaults(handler=cmd_calibrate)

    p_study = sub.add_parser("study", help="Run a simulation study grid from a JSON config")
    p_study.add_argument("--config", required=True)
    p_study.add_argument("--output", help="Results CSV (default: stdout)")
    p_study.add_argument("--resume", action="store_true", help="Skip cells already in --output")
    p_study.add_argument("--threads", type=int)
    p_study.add_argument("--conditional-output", help="CSV of per-replicate branch and second-step p")
    p_study.add_argument("--conditional-method", help="Two-step method id for --conditional-output")
    p_study.add_argument("--conditional-cell", type=int, default=0)
    p_study.set_defaults(handler=cmd_study)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    error_handler = ErrorHandler()
    try:
        # NPH_THREADS is read by load_settings when --threads is absent
        settings = load_settings(threads=getattr(args, 'threads', None))
        return args.handler(args, settings)
    except NphError as e:
        return error_handler.handle_error(e)
    except ValueError as e:
        return error_handler.handle_error(InputError(str(e)))


if __name__ == "__main__":
    sys.exit(main())
