# main.py
"""
batch front end: run and check simulated executions, validate object
specifications, run the work-stealing demo

exit codes: 0 all properties hold, 1 a property is violated, 2 bad input
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from locations import setup_logging
from pcospec import Verdict, FAIL, INCONCLUSIVE, DEFAULT_TRIALS, validate_spec
from objectdefs import build_spec, InvalidObject, OBJECT_TYPES
from simulator import run_scenario, ExecutionRecord
from checker import run_checks
from workstealing import drive_workstealing, task_outcomes, check_work_stealing
from utils import ScenarioConfig, InvalidScenario

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2

# closure checks run ahead of every simulated scenario
RUN_CLOSURE_TRIALS = 200

WORKSTEALING = 'workstealing'

def report(verdicts):
    for v in verdicts:
        print(v.summary())
    failed = [v for v in verdicts if v.status == FAIL]
    for v in verdicts:
        if v.status == INCONCLUSIVE:
            log.warning('%s is inconclusive: %s', v.property, v.detail)
    return EXIT_VIOLATION if failed else EXIT_OK

def write_outputs(record, verdicts, out, stem, code):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    logpath = out / '{}.jsonl'.format(stem)
    record.write(logpath)
    summary = {
        'scenario': record.scenario,
        'log': logpath.name,
        'status': record.footer['status'],
        'final': record.footer['processes'],
        'verdicts': [v.to_json() for v in verdicts],
        'exit_code': code
    }
    with open(out / 'summary.json', 'w', encoding='utf-8') as fobj:
        json.dump(summary, fobj, indent=2, sort_keys=True)
    print('Execution log written to {}.'.format(logpath))
    return logpath

def load_config(path, seed):
    try:
        return ScenarioConfig.from_file(path, seed)
    except (InvalidScenario, InvalidObject) as e:
        print('Configuration error: {}'.format(e), file=sys.stderr)
        return None

def closure_verdicts(spec, scenario):
    return validate_spec(spec, scenario.get('seed', 0), RUN_CLOSURE_TRIALS, RUN_CLOSURE_TRIALS)

def cmd_run(scenario_path, out_path='.', seed=None):
    config = load_config(scenario_path, seed)
    if config is None:
        return EXIT_CONFIG
    scenario = config.current
    obj = scenario['object']
    spec = build_spec(obj['name'], scenario['n'], obj['params'])

    verdicts = closure_verdicts(spec, scenario)
    record = run_scenario(scenario, spec)
    verdicts += run_checks(record, spec)

    code = report(verdicts)
    write_outputs(record, verdicts, out_path, Path(scenario_path).stem, code)
    return code

def cmd_check(log_path):
    try:
        record = ExecutionRecord.read(log_path)
        obj = record.scenario['object']
        spec = build_spec(obj['name'], record.n, obj.get('params'))
    except (OSError, ValueError, KeyError, InvalidObject) as e:
        print('Cannot read execution log {0}: {1}'.format(log_path, e), file=sys.stderr)
        return EXIT_CONFIG

    integrity = record.integrity()
    if not integrity.passed:
        return report([integrity])
    if record.header.get('mode') == WORKSTEALING:
        verdicts = run_checks(record, spec) + [check_work_stealing(task_outcomes(record), record)]
    else:
        # same closure checks as the run that wrote the log
        verdicts = closure_verdicts(spec, record.scenario) + run_checks(record, spec)
    return report(verdicts)

def cmd_validate_spec(object_name, params=None, trials=DEFAULT_TRIALS, seed=0, n=None):
    try:
        spec = build_spec(object_name, n, params)
    except InvalidObject as e:
        return report([Verdict('construction', FAIL, clause='object rejected', detail=str(e))])
    return report(validate_spec(spec, seed, trials))

def cmd_demo_ws(scenario_path, out_path='.', seed=None):
    config = load_config(scenario_path, seed)
    if config is None:
        return EXIT_CONFIG
    scenario = config.current
    if scenario['object']['name'] != 'wsd':
        print('Configuration error: the work-stealing demo needs the "wsd" object.', file=sys.stderr)
        return EXIT_CONFIG
    obj = scenario['object']
    spec = build_spec(obj['name'], scenario['n'], obj['params'])

    (record, outcomes) = drive_workstealing(scenario, spec)
    record.header['mode'] = WORKSTEALING
    verdicts = run_checks(record, spec) + [check_work_stealing(outcomes, record)]

    code = report(verdicts)
    write_outputs(record, verdicts, out_path, Path(scenario_path).stem, code)
    return code

def json_argument(text):
    try:
        value = json.loads(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError('not valid JSON ({})'.format(e))
    if not isinstance(value, dict):
        raise argparse.ArgumentTypeError('expected a JSON object')
    return value

def build_parser():
    parser = argparse.ArgumentParser(prog='pco',
        description='Simulate and check process-commutative replicated objects.')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='more logging (repeatable)')
    parser.add_argument('--logfile', help='also write diagnostics to this file')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='simulate a scenario and check the execution')
    run.add_argument('scenario')
    run.add_argument('--out', default='.')
    run.add_argument('--seed', type=int)

    check = sub.add_parser('check', help='re-check a recorded execution log')
    check.add_argument('log')

    val = sub.add_parser('validate-spec', help='randomized closure checks for an object')
    val.add_argument('object', choices=[ot['tag'] for ot in OBJECT_TYPES])
    val.add_argument('--trials', type=int, default=DEFAULT_TRIALS)
    val.add_argument('--seed', type=int, default=0)
    val.add_argument('--params', type=json_argument, default=None)
    val.add_argument('--n', type=int, default=None)

    demo = sub.add_parser('demo-ws', help='run the work-stealing application')
    demo.add_argument('scenario')
    demo.add_argument('--out', default='.')
    demo.add_argument('--seed', type=int)
    return parser

def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    setup_logging(args.verbose, args.logfile)

    if args.command == 'run':
        return cmd_run(args.scenario, args.out, args.seed)
    if args.command == 'check':
        return cmd_check(args.log)
    if args.command == 'validate-spec':
        return cmd_validate_spec(args.object, args.params, args.trials, args.seed, args.n)
    return cmd_demo_ws(args.scenario, args.out, args.seed)

if __name__ == '__main__':
    sys.exit(main())
