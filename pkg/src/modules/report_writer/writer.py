"""
report_writer モジュール

検証レポートを JSON と要約テキストとして保存する
"""

import json
import math
import os
from datetime import datetime
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

REPORT_VERSION = "1.0"

# 生成時刻以外はマニフェストが同じなら同じ内容になるフィールド
TIMESTAMP_FIELD = "generated_at"


class ReportPaths(NamedTuple):
    """出力ファイルパスを格納するNamedTuple"""

    report: str
    summary: str
    output_dir: str


def to_plain(value: Any) -> Any:
    """numpy の値やタプルを JSON にそのまま書ける値に変換する

    非有限の浮動小数点数は ``"inf"`` / ``"-inf"`` / ``"nan"`` の文字列にする。
    """
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [to_plain(v) for v in items]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def render_report(report: dict) -> str:
    """キーを並べ替えた JSON 文字列"""
    return json.dumps(to_plain(report), ensure_ascii=False, sort_keys=True, indent=2, allow_nan=False) + "\n"


def render_summary(report: dict) -> str:
    """判定の一覧を人が読む形式にする"""
    lines = [f"einstein-embed report {report.get('report_version', REPORT_VERSION)}"]
    for verdict in report.get("verdicts", []):
        mark = "PASS" if verdict["passed"] else "FAIL"
        lines.append(f"  [{mark}] {verdict['name']}: {_fmt(verdict['value'])} (tolerance {_fmt(verdict['tolerance'])})")
    for error in report.get("errors", []):
        lines.append(f"  [ERROR] {error.get('task', '-')}: {error.get('type')}: {error.get('message')}")
    lines.append(f"passed: {report.get('passed', False)}")
    return "\n".join(lines) + "\n"


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.3e}"
    return str(value)


def save_report(report: dict, output_dir: str = "output", use_timestamp: bool = True) -> ReportPaths:
    """レポートを出力ファイルとして保存する

    Args:
        report: パイプラインの結果
        output_dir: 出力ディレクトリのパス
        use_timestamp: タイムスタンプ付きサブディレクトリを作成するか

    Returns:
        ReportPaths: 保存されたファイルのパス情報
    """
    # タイムスタンプ付きサブディレクトリを作成
    if use_timestamp:
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        final_output_dir = os.path.join(output_dir, timestamp)
    else:
        final_output_dir = output_dir

    Path(final_output_dir).mkdir(parents=True, exist_ok=True)

    names = get_output_filenames()
    report_path = _save_file(final_output_dir, names["report"], render_report(report))
    summary_path = _save_file(final_output_dir, names["summary"], render_summary(report))

    return ReportPaths(report=report_path, summary=summary_path, output_dir=final_output_dir)


def _save_file(output_dir: str, filename: str, content: str) -> str:
    file_path = os.path.join(output_dir, filename)
    with open(file_path, "w", encoding="utf-8") as f:
        f.write(content)
    return file_path


def get_output_filenames() -> dict[str, str]:
    """出力ファイル名の辞書を返す"""
    return {
        "report": "report.json",
        "summary": "summary.txt",
    }
