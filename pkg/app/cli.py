"""
命令行入口
python -m app {comass, lemmas, forge, minimize}

stdout 只输出 JSON 报告，诊断信息写到 stderr。
退出码：0 通过；1 数学意义上的失败（报告照常输出）；2 用法或输入错误。
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from .config import Corruption, ForgeModel, RunConfig, settings
from .errors import ArtifactError, CalibError, InvalidInputError, UnsupportedComassError
from .models import AltFormPayload, ComassMode, MetricPayload, RunReport
from .services.comass_service import ComassService
from .services.envelope import wrap
from .services.forge_service import ForgeService
from .services.lemma_service import LemmaService
from .services.trial_service import TrialService

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

USAGE_ERRORS = (
    InvalidInputError,
    UnsupportedComassError,
    ArtifactError,
    ValidationError,
    json.JSONDecodeError,
    OSError,
)


# ==================== 参数解析 ====================

def _common() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--verbose", "-v", action="store_true", help="输出 DEBUG 日志")
    parent.add_argument("--threads", type=int, default=None, help="工作线程数（不影响结果）")
    parent.add_argument("--config", default=None, help="key=value 配置文件，命令行参数优先")
    return parent


def _model_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--model", choices=[m.value for m in ForgeModel], default=None)
    parser.add_argument("--resolution", type=int, default=None)
    parser.add_argument("--amplitude", type=float, default=None)
    parser.add_argument("--epsilon-factor", dest="epsilon_factor", type=float, default=None)
    parser.add_argument("--curve-samples", dest="curve_samples", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m app", description="标定几何数值工具")
    commands = parser.add_subparsers(dest="command", required=True)
    parent = _common()

    comass = commands.add_parser("comass", parents=[parent], help="估计形式的 comass")
    comass.add_argument("--form", required=True, help="形式 JSON 文件（- 表示 stdin）")
    comass.add_argument("--metric", default=None, help="度量 JSON 文件")
    comass.add_argument("--method", choices=[m.value for m in ComassMode], default=ComassMode.AUTO.value)
    comass.add_argument("--samples", type=int, default=None)
    comass.add_argument("--starts", type=int, default=None)
    comass.add_argument("--seed", type=int, default=0)
    comass.add_argument("--tol", type=float, default=None)

    lemmas = commands.add_parser("lemmas", parents=[parent], help="运行逐点引理套件")
    lemmas.add_argument("--suite", default=None, help=f"all 或 {', '.join(LemmaService.suite_names())}")
    lemmas.add_argument("--trials", type=int, default=None)
    lemmas.add_argument("--seed", type=int, default=None)

    forge = commands.add_parser("forge", parents=[parent], help="锻造并认证标定对")
    _model_flags(forge)
    forge.add_argument("--dump-fields", dest="dump_fields", default=None, help="场文件输出路径")
    forge.add_argument("--corrupt", choices=[Corruption.NONE.value, Corruption.RHO.value], default=None)

    minimize = commands.add_parser("minimize", parents=[parent], help="随机竞争闭路的质量试验")
    _model_flags(minimize)
    minimize.add_argument("--competitors", type=int, default=None)
    minimize.add_argument("--complexity", type=int, default=None)
    minimize.add_argument("--competitor-amplitude", dest="competitor_amplitude", type=float, default=None)
    minimize.add_argument("--fields", default=None, help="forge --dump-fields 写出的场文件")
    minimize.add_argument("--corrupt", choices=[Corruption.NONE.value, Corruption.METRIC.value], default=None)
    return parser


def configure_logging(verbose: bool):
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _overrides(args: argparse.Namespace, keys: List[str]) -> Dict[str, Any]:
    return {key: getattr(args, key, None) for key in keys}


def _emit(envelope: RunReport):
    print(json.dumps(envelope.model_dump(mode="json"), sort_keys=True, indent=2))


# ==================== 子命令 ====================

def _read_json(source: str) -> Any:
    text = sys.stdin.read() if source == "-" else Path(source).read_text(encoding="utf-8")
    return json.loads(text)


def cmd_comass(args: argparse.Namespace) -> int:
    form_doc = _read_json(args.form)
    metric_doc = _read_json(args.metric) if args.metric else None
    form = AltFormPayload.model_validate(form_doc)
    metric = MetricPayload.model_validate(metric_doc) if metric_doc is not None else None
    method = ComassMode(args.method)
    estimate = ComassService.estimate(
        form.to_form(),
        metric.to_metric() if metric else None,
        method=method,
        samples=args.samples,
        starts=args.starts,
        seed=args.seed,
        tol=args.tol,
        workers=args.threads or settings.THREADS,
    )
    config = {
        "method": method.value,
        "samples": args.samples or settings.COMASS_SAMPLES,
        "starts": args.starts or settings.COMASS_STARTS,
        "seed": args.seed,
        "tol": args.tol or settings.ASCENT_TOL,
    }
    inputs = {"form": form.model_dump(mode="json"), "metric": metric.model_dump(mode="json") if metric else None}
    _emit(wrap("comass", config, estimate.model_dump(mode="json"), inputs))
    return EXIT_PASS


def cmd_lemmas(args: argparse.Namespace) -> int:
    config = RunConfig.resolve(args.config, _overrides(args, ["suite", "trials", "seed", "threads"]))
    report = LemmaService.run(config.suite, config.trials, config.seed, config.workers)
    public = {"suite": config.suite, "trials": config.trials, "seed": config.seed}
    _emit(wrap("lemmas", public, report.to_json_dict()))
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_forge(args: argparse.Namespace) -> int:
    keys = ["model", "resolution", "amplitude", "epsilon_factor", "curve_samples", "seed",
            "dump_fields", "corrupt", "threads"]
    config = RunConfig.resolve(args.config, _overrides(args, keys))
    envelope, passed = ForgeService.run(config)
    _emit(envelope)
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_minimize(args: argparse.Namespace) -> int:
    keys = ["model", "resolution", "amplitude", "epsilon_factor", "curve_samples", "seed",
            "competitors", "complexity", "competitor_amplitude", "fields", "corrupt", "threads"]
    config = RunConfig.resolve(args.config, _overrides(args, keys))
    envelope, passed = TrialService.run(config)
    _emit(envelope)
    return EXIT_PASS if passed else EXIT_FAIL


COMMANDS = {
    "comass": cmd_comass,
    "lemmas": cmd_lemmas,
    "forge": cmd_forge,
    "minimize": cmd_minimize,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except USAGE_ERRORS as e:
        logger.error(f"输入错误: {e}")
        return EXIT_USAGE
    except CalibError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAIL
