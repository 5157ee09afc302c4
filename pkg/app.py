#!/usr/bin/env python3
"""
bosotop - 玻色 BdG 拓扑数值实验
主应用入口
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

# 添加项目根目录到Python路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config import Config
from src.handlers.command_handlers import CommandHandlers
from src.models.experiment import ExperimentKind
from src.storage.artifact_store import ArtifactSession
from src.utils.config_schema import ConfigSchema
from src.utils.decorators import handle_errors, log_experiment
from src.utils.error_handler import EXIT_OK, EXIT_VALIDATION
from src.utils.logger import lab_logger
from src.utils.memory_monitor import get_memory_status, init_memory_monitor, memory_monitor
from src.utils.resource_manager import get_resource_status

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='bosotop', description="玻色 Bogoliubov 激发的拓扑数值实验")
    subparsers = parser.add_subparsers(dest='command', required=True)
    for kind in ExperimentKind:
        sub = subparsers.add_parser(kind.value)
        sub.add_argument('--config', required=True, help="实验配置 JSON（可用 presets/ 下的预设）")
        sub.add_argument('--output-dir', help="输出目录，覆盖配置中的 output_dir")
        sub.add_argument('--seed', type=int, help="随机种子，覆盖配置中的 seed")
        sub.add_argument('--kappa', type=float, help="线宽 κ，覆盖 params.kappa")
        sub.add_argument('--log-level', help="日志级别，覆盖 LOG_LEVEL")
    return parser


def resolve_config(args: argparse.Namespace):
    """读取配置并叠加命令行覆盖项，返回 (config, status)"""
    config, status = ConfigSchema.load(args.config, args.command)
    if args.output_dir is None and args.seed is None and args.kappa is None:
        return config, status
    data = config.to_dict()
    if args.output_dir is not None:
        data['output_dir'] = args.output_dir
    if args.seed is not None:
        data['seed'] = args.seed
    if args.kappa is not None:
        data['params']['kappa'] = args.kappa
    return ConfigSchema.validate(data, args.command)


@handle_errors
def run(args: argparse.Namespace) -> int:
    """校验 → 构造模型 → 执行子命令 → 提交产物"""
    config, status = resolve_config(args)
    tol = Config.tolerances(config.overrides)
    bundle = ConfigSchema.build_model(config, tol)
    output_dir = config.output_dir or os.path.join(Config.OUTPUT_DIR, config.experiment.value)
    handler = CommandHandlers.get_command_handlers()[args.command]

    @log_experiment(args.command)
    def execute():
        with ArtifactSession(output_dir, manifest=config.to_dict()) as session:
            summary = handler(config, bundle, tol, session)
        return session, summary

    init_memory_monitor()
    try:
        session, summary = execute()
    finally:
        memory_monitor.stop_monitoring()
        logger.info(get_memory_status())
        logger.info(get_resource_status())

    logger.info(f"{status.summary}; 结果: {summary}")
    for name in session.names:
        print(os.path.join(output_dir, name))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """主函数，返回退出码"""
    args = build_parser().parse_args(argv)
    lab_logger.setup(level=args.log_level)
    if not Config.validate_config():
        logger.error("配置验证失败，请检查环境变量")
        return EXIT_VALIDATION
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
