"""
パイプライン

マニフェストのタスク（ricci / embed-local / glue / homotopy / verify）を順に実行し、
タスクごとの結果と判定を 1 つのレポートにまとめる
"""

import logging
from datetime import datetime
from typing import Any, Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

from modules.bell_partition import multiplicity_histogram
from modules.chart_geometry import (
    RESIDUAL_TOL,
    christoffel,
    contracted_bianchi,
    einstein_residual,
    finite_difference_ricci,
    inverse_metric,
    metric_from_expressions,
    metric_function,
    metric_signature,
    residual_norm_by_degree,
    ricci,
    scalar_curvature,
)
from modules.errors import EinsteinEmbedError
from modules.global_glue import (
    GLUE_RESIDUAL_TOL,
    SOLVE_TOL,
    build_product_bulk,
    certify_glue,
    count_equations,
    export_system_csv,
    glue,
)
from modules.homotopy_calc import HomotopyCatalog, product_table, split_product
from modules.local_embed import CONSTRAINT_TOL, SeedMetric, certify, extend_metric
from modules.manifest_loader import Manifest
from modules.report_writer import REPORT_VERSION

# 差分による検算との相対誤差
ORACLE_TOL = 1e-6

# チャート中心での縮約ビアンキ恒等式 ∇^A G_AB = 0
BIANCHI_TOL = 1e-6


def _verdict(name: str, value: Any, tolerance: Any, comparison: str = "<=") -> dict:
    if comparison == "<=":
        passed = value <= tolerance
    elif comparison == ">":
        passed = value > tolerance
    else:
        passed = value == tolerance
    return {
        "name": name,
        "value": value,
        "tolerance": tolerance,
        "comparison": comparison,
        "passed": bool(passed),
    }


def run_ricci(manifest: Manifest, context: dict) -> tuple:
    """種計量のチャート中心での曲率と、差分による検算"""
    metric = manifest.manifold.metric
    center = manifest.seed_center
    g = metric_from_expressions(metric, center, manifest.order)
    ginv = inverse_metric(g)
    gamma = christoffel(g, ginv)
    ric = ricci(gamma)
    R = scalar_curvature(g, ric, ginv)

    jet_values = ric.constant_matrix()
    oracle = finite_difference_ricci(metric_function(metric), center)
    error = float(np.max(np.abs(jet_values - oracle)) / max(1.0, float(np.max(np.abs(oracle)))))

    section = {
        "point": center,
        "signature": list(metric_signature(g)),
        "christoffel": [[[c.constant_term for c in row] for row in plane] for plane in gamma.gamma],
        "ricci": jet_values,
        "scalar_curvature": R.constant_term,
        "oracle_ricci": oracle,
        "oracle_relative_error": error,
        "oracle_tolerance": ORACLE_TOL,
    }
    verdicts = [_verdict("ricci.oracle_relative_error", error, ORACLE_TOL)]

    if manifest.lam == 0.0 or g.dim > 2:
        section["einstein_residual_by_degree"] = residual_norm_by_degree(einstein_residual(g, manifest.lam, ric))
    if g.order >= 3:
        bianchi = float(np.max(np.abs(contracted_bianchi(g))))
        section["contracted_bianchi"] = bianchi
        verdicts.append(_verdict("ricci.contracted_bianchi", bianchi, BIANCHI_TOL))
    return section, verdicts


def _seed(manifest: Manifest) -> SeedMetric:
    return SeedMetric.from_expressions(manifest.manifold.metric, manifest.seed_center, manifest.order)


def run_embed_local(manifest: Manifest, context: dict) -> tuple:
    """チャート中心のまわりで種計量を余次元 1 のアインシュタイン計量に拡張する"""
    result = extend_metric(_seed(manifest), manifest.lam, manifest.epsilon, manifest.order)
    context["embedding"] = result
    report = certify(result)
    section = {"result": result.to_dict(), "certificate": report}
    verdicts = [
        _verdict("embed_local.slice_deviation", report["slice_deviation"], 0.0),
        _verdict("embed_local.residual", report["residual_norm"], report["residual_tolerance"]),
        _verdict("embed_local.constraints", report["constraint_norm"], report["constraint_tolerance"]),
        _verdict("embed_local.block_form", report["block_form"], True, "=="),
    ]
    return section, verdicts


def run_glue(manifest: Manifest, context: dict, csv_dir: Optional[str] = None) -> tuple:
    """M × F の被覆・重なりの方程式系・最小ノルム解・組み立てた計量の検証"""
    cover = manifest.cover
    bulk = build_product_bulk(manifest.manifold, manifest.fiber, N=cover.N, seed=cover.seed)
    spec, system = glue(
        bulk,
        manifest.lam,
        order=cover.glue_order,
        extension_order=manifest.order,
        per_overlap=cover.per_overlap,
        epsilon=manifest.epsilon,
    )
    context["glue"] = spec
    report = certify_glue(spec)
    failed_charts = sum(1 for t in spec.targets.values() if not t.certificate["passed"])

    section = {
        "M": count_equations(bulk.n),
        "N": bulk.N,
        "product": bulk.manifold.name,
        "charts": len(bulk.atlas.elements),
        "multiplicity": multiplicity_histogram(bulk.atlas, spec.samples.points),
        "system": system.to_dict(),
        "solution": spec.solution.to_dict(),
        "certificate": report,
    }
    if csv_dir:
        section["csv"] = export_system_csv(system, csv_dir)

    verdicts = [
        _verdict("glue.solve_residual", spec.solution.residual, SOLVE_TOL),
        _verdict("glue.rank_deficiency", spec.solution.expected_rank - spec.solution.rank, 0),
        _verdict("glue.assembled_residual", report["assembled_residual"], GLUE_RESIDUAL_TOL),
        _verdict("glue.restriction_deviation", report["restriction_deviation"], 0.0),
        _verdict("glue.locality_ratio", report["locality_ratio"], report["locality_factor"]),
        _verdict("glue.bell_sum_min", report["bell_sum_min"], 0.0, ">"),
        _verdict("glue.failed_chart_certificates", failed_charts, 0),
    ]
    return section, verdicts


def run_homotopy(manifest: Manifest, context: dict) -> tuple:
    """π_m(M × F) の分解表"""
    options = manifest.homotopy
    catalog = HomotopyCatalog()
    for entry in options.entries:
        catalog.register(entry["id"], entry["groups"], entry.get("source", "user"))

    base, fiber = manifest.homotopy_id, manifest.homotopy_fiber
    levels = range(1, options.m_max + 1)
    rows = []
    mismatches = 0
    for m in levels:
        product = split_product(base, fiber, m, catalog)
        if product != split_product(fiber, base, m, catalog):
            mismatches += 1
        rows.append(
            {
                "m": m,
                "base": catalog.group(base, m).to_dict(),
                "fiber": catalog.group(fiber, m).to_dict(),
                "product": product.to_dict(),
            }
        )
    table = product_table(options.products, options.m_max, catalog)
    section = {
        "manifold": base,
        "fiber": fiber,
        "levels": rows,
        "products": {key: [g.to_dict() for g in groups] for key, groups in table.items()},
        "sources": {key: catalog.entries[catalog.resolve(key)].source for key in (base, fiber) if " x " not in key},
    }
    return section, [_verdict("homotopy.commutativity_mismatches", mismatches, 0)]


def run_verify(manifest: Manifest, context: dict) -> tuple:
    """保存された結果の計量だけから、証明書を独立に計算し直す"""
    result = context.get("embedding")
    if result is None:
        result = extend_metric(_seed(manifest), manifest.lam, manifest.epsilon, manifest.order)
    report = certify(result)
    section = {"embedding": report}
    verdicts = [
        _verdict("verify.slice_deviation", report["slice_deviation"], 0.0),
        _verdict("verify.residual", report["residual_norm"], RESIDUAL_TOL),
        _verdict("verify.constraints", report["constraint_norm"], CONSTRAINT_TOL),
    ]

    g = result.bulk.to_chart_metric()
    if g.order >= 3:
        bianchi = float(np.max(np.abs(contracted_bianchi(g))))
        section["bulk_contracted_bianchi"] = bianchi
        verdicts.append(_verdict("verify.bulk_contracted_bianchi", bianchi, BIANCHI_TOL))

    spec = context.get("glue")
    if spec is not None:
        glue_report = certify_glue(spec)
        section["glue"] = glue_report
        verdicts.append(_verdict("verify.glue_certificate", glue_report["passed"], True, "=="))
    return section, verdicts


TASK_RUNNERS: dict[str, Callable] = {
    "ricci": run_ricci,
    "embed-local": run_embed_local,
    "glue": run_glue,
    "homotopy": run_homotopy,
    "verify": run_verify,
}


def main(manifest: Manifest, csv_dir: Optional[str] = None) -> dict:
    """マニフェストのタスクを実行してレポートを作る

    タスクごとのエラーはレポートの ``errors`` に記録し、残りのタスクを続ける。

    Args:
        manifest: 読み込み済みのマニフェスト
        csv_dir: glue の方程式系を CSV に書き出すディレクトリ

    Returns:
        レポート（``passed`` はエラーがなく全判定が通ったとき True）
    """
    results = {
        "report_version": REPORT_VERSION,
        "generated_at": datetime.now().isoformat(),
        "manifest": manifest.to_dict(),
        "tasks": {},
        "verdicts": [],
        "processed": [],
        "errors": [],
    }
    context: dict = {}

    for task in manifest.tasks:
        logger.info(f"Running task: {task}")
        try:
            if task == "glue":
                section, verdicts = run_glue(manifest, context, csv_dir)
            else:
                section, verdicts = TASK_RUNNERS[task](manifest, context)
            results["tasks"][task] = section
            results["verdicts"].extend(verdicts)
            results["processed"].append(task)
            failed = [v["name"] for v in verdicts if not v["passed"]]
            if failed:
                logger.warning(f"Task {task} has failing verdicts: {failed}")
            else:
                logger.info(f"Task {task} completed: {len(verdicts)} verdicts passed")
        except EinsteinEmbedError as e:
            logger.error(f"Error in task {task}: {e}", exc_info=True)
            results["errors"].append({"task": task, **e.to_dict()})
        except Exception as e:
            logger.error(f"Unexpected error in task {task}: {e}", exc_info=True)
            results["errors"].append({"task": task, "type": type(e).__name__, "module": task, "message": str(e)})

    results["passed"] = not results["errors"] and all(v["passed"] for v in results["verdicts"])
    results["message"] = (
        f"処理完了: {len(results['processed'])}件成功, "
        f"{len(results['errors'])}件エラー, "
        f"{sum(1 for v in results['verdicts'] if not v['passed'])}件の判定失敗"
    )
    logger.info(results["message"])
    return results
