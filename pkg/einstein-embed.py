#!/usr/bin/env python3
"""
einstein-embed CLI

マニフェストに書いた計量を、アインシュタイン空間へ局所的・大域的に埋め込み、
各段階の検証レポートを JSON で出力するCLIツール。
"""

import argparse
import logging
import os
import sys

# Add src to path for module imports
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "src"))

from modules.errors import ExpressionError, ManifestError
from modules.manifest_loader import TASKS, load_manifest, load_settings
from modules.report_writer import render_summary, save_report

import pipeline

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_MANIFEST = 2


def build_parser() -> argparse.ArgumentParser:
    """Build the command line parser."""
    parser = argparse.ArgumentParser(
        prog="einstein-embed",
        description="計量のアインシュタイン空間への埋め込みと検証レポートの生成",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
使用例:
  # マニフェストの全タスクを実行
  python einstein-embed.py run --manifest examples.yaml

  # 局所埋め込みだけを次数 6 で実行
  python einstein-embed.py embed-local --manifest sphere.yaml --order 6

  # 貼り合わせの方程式系を CSV にも書き出す
  python einstein-embed.py glue --manifest circle.json --csv-dir ./csv

終了コード:
  0 → すべての判定が合格
  1 → 計算エラーまたは判定の失敗
  2 → マニフェストのスキーマ・式のエラー
        """,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", "-m", required=True, help="マニフェスト（.json / .yaml）")
    common.add_argument("--order", type=int, help="ジェットの打ち切り次数 K（マニフェストより優先）")
    common.add_argument("--lambda", dest="lam", type=float, help="宇宙定数 Λ（マニフェストより優先）")
    common.add_argument(
        "--out",
        "-o",
        help="出力ディレクトリ（デフォルト: EINSTEIN_EMBED_OUTPUT_DIR または output）",
    )
    common.add_argument("--csv-dir", help="貼り合わせの方程式系（行列・右辺・行の由来）の CSV 出力先")
    common.add_argument("--no-timestamp", action="store_true", help="出力ディレクトリにタイムスタンプを付けない")
    common.add_argument("--verbose", "-v", action="store_true", help="DEBUG ログを出力する")

    subparsers.add_parser("run", parents=[common], help="マニフェストの tasks をすべて実行")
    descriptions = {
        "ricci": "チャート中心での曲率と差分による検算",
        "embed-local": "余次元 1 のアインシュタイン計量への局所拡張",
        "glue": "M × F 上での貼り合わせ",
        "homotopy": "積多様体のホモトピー群の分解表",
        "verify": "拡張結果の独立な検証",
    }
    for task in TASKS:
        subparsers.add_parser(task, parents=[common], help=descriptions[task])
    return parser


def parse_args(argv=None):
    """Parse command line arguments."""
    return build_parser().parse_args(argv)


def main(argv=None) -> int:
    """Main entry point."""
    args = parse_args(argv)
    settings = load_settings(output_override=args.out, verbose=args.verbose)
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    print(f"処理中: {args.manifest}")

    # Load manifest with priority: CLI > manifest > defaults
    tasks = None if args.command == "run" else [args.command]
    try:
        manifest = load_manifest(
            args.manifest,
            order_override=args.order,
            lambda_override=args.lam,
            tasks_override=tasks,
        )
    except ManifestError as e:
        print(f"Error: マニフェストエラー: {e}", file=sys.stderr)
        for violation in e.details.get("violations", []):
            print(f"  - {violation['path']}: {violation['message']}", file=sys.stderr)
        return EXIT_MANIFEST
    except ExpressionError as e:
        position = f"（{e.details['offset']} 文字目）" if "offset" in e.details else ""
        print(f"Error: 計量の式のエラー{position}: {e}", file=sys.stderr)
        return EXIT_MANIFEST

    print(f"  多様体: {manifest.manifold.name}, Λ={manifest.lam}, K={manifest.order}")
    print(f"  タスク: {', '.join(manifest.tasks)}")

    report = pipeline.main(manifest, csv_dir=args.csv_dir)

    try:
        paths = save_report(report, output_dir=settings.output_dir, use_timestamp=not args.no_timestamp)
    except OSError as e:
        print(f"Error: ファイル保存エラー: {e}", file=sys.stderr)
        return EXIT_FAILED

    print()
    print(render_summary(report), end="")
    print(f"\n出力完了:")
    print(f"  - レポート: {paths.report}")
    print(f"  - 要約: {paths.summary}")
    if "csv" in report["tasks"].get("glue", {}):
        print(f"  - CSV: {args.csv_dir}")

    for error in report["errors"]:
        print(f"Error: {error['task']}: {error['type']}: {error['message']}", file=sys.stderr)

    return EXIT_OK if report["passed"] else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
