"""
CLI Module - Command-Line Front End

This module exposes every capability of the package as subcommands:
- box make|validate|depolarize|local
- attack single|product|collective
- lp solve|certify
- keyrate, region
- protocol run

Exit status is 0 on success, 1 on a domain or validation failure and 2 on
a usage error. Primary output (stdout or --out) depends only on the
arguments and the seed; log lines go to stderr.
"""

import argparse
import logging
import sys
from fractions import Fraction
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .boxcore import (ConditionalBox, apply_output_noise, chsh_error, depolarize, is_local,
                      locality_residual, make_deterministic_box, make_isotropic_box, make_pr_box,
                      make_quantum_box, make_singlet_box, tensor_boxes, validate_nonsignaling)
from .errors import DomainError, NskdError
from .file_writer import table_to_csv, write_csv_atomic, write_file_atomic
from .lpcert import (build_xor_primal, solve_lp, tensor_certificate, tensor_xor_primal,
                     verify_certificate, verify_tensor_certificate)
from .partition import (at_least_one_local, attack_report, collective_attack, known_fraction,
                        product_attack, single_box_attack)
from .protocol import (SINGLET_ANGLES, ProtocolConfig, key_rate_report, quantum_curve, region_table,
                       run_protocol)
from .rationals import format_decimal, format_value, parse_fraction
from .serialization import (box_from_dict, box_to_dict, config_from_dict, dumps, lp_to_dict,
                            partition_to_dict, read_json_file, transcript_to_dict)

logger = logging.getLogger(__name__)

MAX_LP_PAIRS = 3
EXPLICIT_CERTIFICATE_PAIRS = 2


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)


# ----------------------------------------------------------------------
# Argument types
# ----------------------------------------------------------------------

def _rational(text: str) -> Fraction:
    try:
        return parse_fraction(text)
    except DomainError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _bits(text: str) -> Tuple[int, ...]:
    if not text or any(c not in "01" for c in text):
        raise argparse.ArgumentTypeError(f"'{text}' is not a bit string")
    return tuple(int(c) for c in text)


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


# ----------------------------------------------------------------------
# Output helpers
# ----------------------------------------------------------------------

def _emit_json(args, data: Any) -> None:
    """Write data to --out, or print it when no output file is given."""
    text = dumps(data)
    if args.out:
        write_file_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _save_json(args, data: Any) -> None:
    if args.out:
        write_file_atomic(args.out, dumps(data))


def _line(label: str, value) -> None:
    print(f"{label}: {format_value(value)}")


def _load_box(path: str) -> ConditionalBox:
    return box_from_dict(read_json_file(path))


def _inputs(bits: Optional[Tuple[int, ...]], n: int, name: str) -> Tuple[int, ...]:
    if bits is None:
        return (0,) * n
    if len(bits) != n:
        raise DomainError(f"--{name} needs {n} bit(s), got {len(bits)}")
    return bits


# ----------------------------------------------------------------------
# box
# ----------------------------------------------------------------------

def cmd_box_make(args) -> int:
    kind = args.kind
    if kind == "pr":
        box = make_pr_box()
    elif kind == "isotropic":
        box = make_isotropic_box(_require(args.epsilon, "--epsilon"))
    elif kind == "quantum":
        box = make_quantum_box(args.delta, args.noise)
    elif kind == "singlet":
        box = make_singlet_box(*args.angles)
    else:
        box = make_deterministic_box(*_require(args.strategy, "--strategy"))
    if args.flip:
        box = apply_output_noise(box, args.flip)
    if args.pairs > 1:
        box = tensor_boxes([box] * args.pairs)
    _emit_json(args, box_to_dict(box))
    return 0


def _require(value, flag: str):
    if value is None:
        raise DomainError(f"{flag} is required for this box kind")
    return value


def cmd_box_validate(args) -> int:
    box = _load_box(args.box)
    report = validate_nonsignaling(box)
    print(f"non-signaling: {'yes' if report.valid else 'no'}")
    print(f"checks: {report.checks}")
    if not report.valid:
        print(f"failure: {report.message} ({report.location})")
        _line("worst violation", report.worst_violation)
    if box.n_pairs == 1:
        _line("chsh error", chsh_error(box))
    _save_json(args, report.to_dict())
    return 0 if report.valid else 1


def cmd_box_depolarize(args) -> int:
    box = depolarize(_load_box(args.box))
    _emit_json(args, box_to_dict(box))
    return 0


def cmd_box_local(args) -> int:
    box = _load_box(args.box)
    local = is_local(box)
    print(f"local: {'yes' if local else 'no'}")
    _line("residual", locality_residual(box))
    return 0


# ----------------------------------------------------------------------
# attack
# ----------------------------------------------------------------------

def _report_partition(args, partition, u, v) -> None:
    report = attack_report(partition, u=u, v=v)
    print(f"elements: {len(partition.elements)}")
    _line("distance", report.distance)
    _save_json(args, partition_to_dict(partition))


def cmd_attack_single(args) -> int:
    partition = single_box_attack(make_isotropic_box(args.epsilon))
    _report_partition(args, partition, 0, 0)
    return 0


def cmd_attack_product(args) -> int:
    boxes = [make_isotropic_box(e) for e in args.epsilon]
    n = len(boxes)
    partition = product_attack(boxes)
    _report_partition(args, partition, _inputs(args.u, n, "u"), _inputs(args.v, n, "v"))
    return 0


def cmd_attack_collective(args) -> int:
    partition = collective_attack(args.epsilon, args.n, expand=not args.no_expand)
    print(f"elements: {len(partition.elements)}")
    _line("at least one local", at_least_one_local(partition))
    _line("known fraction", known_fraction(args.epsilon))
    _save_json(args, partition_to_dict(partition))
    return 0


# ----------------------------------------------------------------------
# lp
# ----------------------------------------------------------------------

def _lp_marginal(args) -> ConditionalBox:
    if args.box:
        return _load_box(args.box)
    if args.epsilon is None:
        raise DomainError("give --epsilon or --box")
    if not 1 <= args.n <= MAX_LP_PAIRS:
        raise DomainError(f"lp solve supports 1 to {MAX_LP_PAIRS} pairs")
    return tensor_boxes([make_isotropic_box(args.epsilon)] * args.n)


def cmd_lp_solve(args) -> int:
    marginal = _lp_marginal(args)
    n = marginal.n_pairs
    if n > MAX_LP_PAIRS:
        raise DomainError(f"lp solve supports at most {MAX_LP_PAIRS} pairs")
    lp = build_xor_primal(marginal, _inputs(args.u, n, "u"), _inputs(args.v, n, "v"))
    if args.dump:
        write_file_atomic(args.dump, dumps(lp_to_dict(lp)))
    value, _ = solve_lp(lp)
    print(f"variables: {lp.n_vars}")
    print(f"rows: {lp.n_rows}")
    _line("optimum", value)
    _line("distance bound", value / 2)
    _save_json(args, {'optimum': value, 'distance_bound': value / 2})
    return 0


def cmd_lp_certify(args) -> int:
    if args.epsilon is None:
        raise DomainError("lp certify needs --epsilon")
    n = args.n
    u, v = _inputs(args.u, n, "u"), _inputs(args.v, n, "v")
    single = make_isotropic_box(args.epsilon)
    marginals = [single] * n
    per_box = list(zip(u, v))
    if n <= EXPLICIT_CERTIFICATE_PAIRS:
        cert = tensor_certificate(per_box, marginals)
        verified = verify_certificate(tensor_xor_primal(marginals, u, v), cert)
    else:
        cert = tensor_certificate(per_box, marginals, expand=False)
        verified = verify_tensor_certificate(per_box, marginals, cert)
    _line("bound", cert.claimed_bound)
    _line("distance bound", cert.claimed_bound / 2)
    print(f"certificate: {'VERIFIED' if verified else 'REJECTED'}")
    _save_json(args, cert.to_dict())
    return 0 if verified else 1


# ----------------------------------------------------------------------
# keyrate, region, protocol
# ----------------------------------------------------------------------

def cmd_keyrate(args) -> int:
    report = key_rate_report(float(args.epsilon), float(args.delta))
    print(f"rate: {format_decimal(report.rate)}")
    print(f"feasible: {'yes' if report.feasible else 'no'}")
    print(f"epsilon_max: {format_decimal(report.epsilon_max)}")
    _save_json(args, report.to_dict())
    return 0


def cmd_region(args) -> int:
    if args.curve:
        table = quantum_curve(np.linspace(0, float(args.p_max), args.steps))
    else:
        table = region_table(np.linspace(0, 0.5, args.steps), np.linspace(0, 0.25, args.steps))
    if (args.format or "csv") == "csv":
        if args.out:
            write_csv_atomic(table, args.out)
        else:
            sys.stdout.write(table_to_csv(table))
    else:
        _emit_json(args, table.to_dict(orient='records'))
    return 0


def _protocol_config(args) -> ProtocolConfig:
    data: Dict[str, Any] = read_json_file(args.config) if args.config else {}
    overrides = {'n': args.n, 'k': args.k, 's': args.s, 'seed': args.seed,
                 'slack': args.slack, 'delta_slack': args.delta_slack}
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    if args.depolarize:
        data['depolarize'] = True
    if args.source:
        source = {'kind': args.source}
        if args.source == "quantum":
            source.update(delta=args.source_delta, noise=args.noise)
        elif args.source == "singlet":
            source.update(angles=list(args.angles), flip=args.flip)
        else:
            source['epsilon'] = _require(args.source_epsilon, "--source-epsilon")
        data['source'] = source
    for key in ('n', 'k'):
        if key not in data:
            raise DomainError(f"protocol config needs '{key}'")
    return config_from_dict(data)


def cmd_protocol_run(args) -> int:
    config = _protocol_config(args)
    transcript = run_protocol(config)
    if transcript.aborted:
        print(f"status: aborted ({transcript.abort_reason})")
    else:
        print("status: ok")
        print(f"syndrome bits: {transcript.m}")
        print(f"key bits: {transcript.s}")
        print(f"keys agree: {'yes' if transcript.key_alice == transcript.key_bob else 'no'}")
        print(f"bound: {format_decimal(transcript.bound)}")
    if transcript.epsilon_hat is not None:
        print(f"epsilon_hat: {format_decimal(transcript.epsilon_hat)}")
    if transcript.delta_hat is not None:
        print(f"delta_hat: {format_decimal(transcript.delta_hat)}")
    _save_json(args, transcript_to_dict(transcript))
    return 0


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=_seed, help='Seed of the random generator (u64)')
    common.add_argument('--out', help='Write the primary output to this file')
    common.add_argument('--format', choices=['json', 'csv'], help='Output format')
    common.add_argument('--verbose', '-v', action='store_true', help='Enable debug logging')
    return common


def _add(subparsers, name: str, help_text: str, handler: Callable, common,
         formats: Tuple[str, ...] = ("json",)) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(name, help=help_text, description=help_text, parents=[common])
    parser.set_defaults(handler=handler, formats=formats)
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog='nskd', description='Key distribution secure against non-signaling adversaries')
    groups = parser.add_subparsers(dest='group', metavar='command', required=True)

    # box
    box = groups.add_parser('box', help='Conditional boxes P(x,y|u,v)')
    box_cmds = box.add_subparsers(dest='command', metavar='action', required=True)
    make = _add(box_cmds, 'make', 'Build a PR, isotropic, quantum, singlet or deterministic box',
                cmd_box_make, common)
    make.add_argument('--kind', choices=['pr', 'isotropic', 'quantum', 'singlet', 'deterministic'],
                      required=True)
    make.add_argument('--epsilon', type=_rational, help='CHSH error of an isotropic box')
    make.add_argument('--delta', type=_rational, default=Fraction(0), help='(0,0) disagreement of a quantum box')
    make.add_argument('--noise', type=_rational, default=Fraction(0), help='Extra error on the other inputs')
    make.add_argument('--angles', type=float, nargs=4, default=list(SINGLET_ANGLES),
                      metavar=('A0', 'A1', 'B0', 'B1'), help='Singlet measurement angles in degrees')
    make.add_argument('--strategy', type=int, nargs=4, choices=[0, 1], metavar=('X0', 'X1', 'Y0', 'Y1'),
                      help='Deterministic strategy x = x_u, y = y_v')
    make.add_argument('--flip', type=_rational, default=Fraction(0), help='Independent output flip probability')
    make.add_argument('--pairs', type=int, default=1, help='Tensor this many independent copies')

    validate = _add(box_cmds, 'validate', 'Check the non-signaling conditions of a box file',
                    cmd_box_validate, common)
    validate.add_argument('--box', required=True)
    depol = _add(box_cmds, 'depolarize', 'Depolarize a box into its unbiased isotropic form',
                 cmd_box_depolarize, common)
    depol.add_argument('--box', required=True)
    local = _add(box_cmds, 'local', 'Test whether a box is a mix of deterministic strategies',
                 cmd_box_local, common)
    local.add_argument('--box', required=True)

    # attack
    attack = groups.add_parser('attack', help='Non-signaling box partitions (eavesdropping attacks)')
    attack_cmds = attack.add_subparsers(dest='command', metavar='action', required=True)
    single = _add(attack_cmds, 'single', 'Optimal box partition of one isotropic box',
                  cmd_attack_single, common)
    single.add_argument('--epsilon', type=_rational, required=True)
    product = _add(attack_cmds, 'product', 'Product of single-box partitions against the XOR key',
                   cmd_attack_product, common)
    product.add_argument('--epsilon', type=_rational, nargs='+', required=True, help='One error per box')
    product.add_argument('--u', type=_bits)
    product.add_argument('--v', type=_bits)
    collective = _add(attack_cmds, 'collective', 'Collective partition exposing at least one local box',
                      cmd_attack_collective, common)
    collective.add_argument('--epsilon', type=_rational, required=True)
    collective.add_argument('--n', type=int, required=True)
    collective.add_argument('--no-expand', action='store_true',
                            help='Keep local boxes unsplit instead of listing deterministic strategies')

    # lp
    lp = groups.add_parser('lp', help='XOR distance linear program and dual certificates')
    lp_cmds = lp.add_subparsers(dest='command', metavar='action', required=True)
    solve = _add(lp_cmds, 'solve', 'Solve the XOR-distance primal program exactly', cmd_lp_solve, common)
    certify = _add(lp_cmds, 'certify', 'Build and verify the tensor dual certificate', cmd_lp_certify, common)
    for sub in (solve, certify):
        sub.add_argument('--epsilon', type=_rational, help='CHSH error of each isotropic box')
        sub.add_argument('--n', type=int, default=1, help='Number of boxes')
        sub.add_argument('--u', type=_bits, help="Alice's inputs as a bit string")
        sub.add_argument('--v', type=_bits, help="Bob's inputs as a bit string")
    solve.add_argument('--box', help='Marginal box file instead of isotropic boxes')
    solve.add_argument('--dump', help='Write the program as JSON')

    # keyrate / region
    keyrate = _add(groups, 'keyrate', 'Key rate 1 - h(delta) - log2(1 + 4 epsilon)', cmd_keyrate, common)
    keyrate.add_argument('--epsilon', type=_rational, required=True)
    keyrate.add_argument('--delta', type=_rational, required=True)
    region = _add(groups, 'region', 'Key rate over the (delta, epsilon) region, or the quantum curve',
                  cmd_region, common, formats=("csv", "json"))
    region.add_argument('--steps', type=int, default=11, help='Grid points per axis')
    region.add_argument('--curve', action='store_true', help='Emit the noisy singlet curve instead')
    region.add_argument('--p-max', type=_rational, default=Fraction(1, 10), help='Largest flip probability')

    # protocol
    protocol = groups.add_parser('protocol', help='End-to-end key agreement simulation')
    protocol_cmds = protocol.add_subparsers(dest='command', metavar='action', required=True)
    run = _add(protocol_cmds, 'run', 'Run the key agreement protocol and record its transcript',
               cmd_protocol_run, common)
    run.add_argument('--config', help='ProtocolConfig JSON file; flags override its fields')
    run.add_argument('--n', type=int, help='Raw key length')
    run.add_argument('--k', type=int, help='Test rounds')
    run.add_argument('--s', type=int, help='Key length (default: from the key rate)')
    run.add_argument('--slack', type=float)
    run.add_argument('--delta-slack', type=float)
    run.add_argument('--source', choices=['quantum', 'singlet', 'isotropic'])
    run.add_argument('--source-delta', type=float, default=0.0)
    run.add_argument('--noise', type=float, default=0.0)
    run.add_argument('--source-epsilon', type=float)
    run.add_argument('--angles', type=float, nargs=4, default=list(SINGLET_ANGLES))
    run.add_argument('--flip', type=float, default=0.0)
    run.add_argument('--depolarize', action='store_true')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main function for command-line interface."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format and args.format not in args.formats:
        parser.error(f"--format {args.format} is not supported by this command")
    _setup_logging(args.verbose)

    try:
        return args.handler(args)
    except NskdError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    """
    Usage Examples:

    1. Certify the two-box XOR bound:
       python -m nskd lp certify --n 2 --epsilon 1/10

    2. Key rate at a point of the region:
       python -m nskd keyrate --epsilon 3/16 --delta 0

    3. Region table as CSV:
       python -m nskd region --steps 21 --out region.csv

    4. Simulate the protocol:
       python -m nskd protocol run --n 16 --k 512 --seed 7 --out transcript.json
    """
    sys.exit(main())
