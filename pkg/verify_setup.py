"""Sanity check of the checkout: files, operations, dependencies, one smoke run."""
import importlib
import os
import sys
from pathlib import Path
from typing import Callable, List, Tuple

project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

REQUIRED_FILES = [
    "estimators/errors.py",
    "estimators/location.py",
    "estimators/scatter.py",
    "estimators/spectral.py",
    "estimators/poet.py",
    "estimators/precision.py",
    "estimators/scale.py",
    "models/factor_model.py",
    "models/scenario.py",
    "experiments/pipelines.py",
    "experiments/evaluate.py",
    "experiments/run_experiment.py",
    "experiments/backtest.py",
    "experiments/utils.py",
    "data/load_data.py",
    "data/sample/returns_toy.csv",
    "reports/builder.py",
    "reports/templates/table.txt",
    "config/base.yaml",
    "config/scenario1.yaml",
    "config/precision.yaml",
    "config/factors.yaml",
    "config/backtest.yaml",
    "requirements.txt",
]

PACKAGES = ["estimators", "models", "experiments", "data", "reports"]

OPERATIONS = [
    ("estimators.location", "spatial_median"),
    ("estimators.scatter", "spatial_sign_covariance"),
    ("estimators.scatter", "tyler_plugin"),
    ("estimators.scatter", "reg_tyler"),
    ("estimators.spectral", "estimate_num_factors"),
    ("estimators.poet", "poet"),
    ("estimators.poet", "select_threshold_constant"),
    ("estimators.precision", "clime"),
    ("estimators.precision", "glasso"),
    ("estimators.precision", "woodbury_correct"),
    ("estimators.scale", "huber_scale"),
    ("experiments.run_experiment", "run_experiment"),
    ("experiments.run_experiment", "run_factor_count_experiment"),
    ("experiments.backtest", "rolling_backtest"),
]

# import name -> requirements.txt name
DEPENDENCIES = {
    "numpy": "numpy",
    "scipy.optimize": "scipy",
    "pandas": "pandas",
    "sklearn.model_selection": "scikit-learn",
    "yaml": "pyyaml",
    "jinja2": "jinja2",
    "dotenv": "python-dotenv",
    "tqdm": "tqdm",
    "pytest": "pytest",
}


def _has_attribute(module_name: str, name: str) -> bool:
    try:
        return hasattr(importlib.import_module(module_name), name)
    except Exception:
        return False


def _imports(module_name: str) -> bool:
    try:
        importlib.import_module(module_name)
        return True
    except ImportError:
        return False


def check_files() -> List[Tuple[str, bool]]:
    files = [(path, os.path.exists(path)) for path in REQUIRED_FILES]
    packages = [(f"{p}/__init__.py", os.path.exists(os.path.join(p, "__init__.py"))) for p in PACKAGES]
    return files + packages


def check_operations() -> List[Tuple[str, bool]]:
    return [(f"{m}.{name}", _has_attribute(m, name)) for m, name in OPERATIONS]


def check_dependencies() -> List[Tuple[str, bool]]:
    declared = ""
    if os.path.exists("requirements.txt"):
        with open("requirements.txt", "r", encoding="utf-8") as f:
            declared = f.read().lower()
    results = []
    for module_name, package in DEPENDENCIES.items():
        results.append((f"{package} declared", package.lower() in declared))
        results.append((f"{module_name} importable", _imports(module_name)))
    return results


def check_smoke_run() -> List[Tuple[str, bool]]:
    """Spatial median of a symmetric cloud, then one POET-SS fit on a small scenario."""
    try:
        import numpy as np
        from estimators.location import spatial_median
        from experiments.pipelines import fit_pipeline, pipeline_preset
        from models import sample, scenario_preset

        X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]) + 3.0
        median_ok = bool(np.allclose(spatial_median(X).mu_hat, [3.0, 3.0], atol=1e-6))

        spec, tail, B, _ = scenario_preset("II", n=50, d=20).build()
        data = sample(spec, tail, 50, loadings=B, rng=np.random.default_rng(0))
        fit = fit_pipeline(data, pipeline_preset("POET-SS"), m=3)
        fit_ok = bool(np.isclose(np.trace(fit.sigma0_hat), 20.0)) and fit.cov_hat is not None
        return [("spatial median of a symmetric cloud", median_ok), ("POET-SS fit on scenario II", fit_ok)]
    except Exception as e:
        print(f"  ❌ Smoke run failed: {e}")
        return [("smoke run", False)]


CHECKS: List[Tuple[str, Callable[[], List[Tuple[str, bool]]]]] = [
    ("📁 Files", check_files),
    ("🔧 Operations", check_operations),
    ("📦 Dependencies", check_dependencies),
    ("🔗 Smoke run", check_smoke_run),
]


def main():
    print("🔍 Verifying Setup")
    print("=" * 50)

    summary = []
    for title, check in CHECKS:
        print(f"{title}:")
        results = check()
        for label, ok in results:
            print(f"  {'✅' if ok else '❌'} {label}")
        passed = sum(ok for _, ok in results)
        summary.append((title, passed, len(results)))
        print()

    print("📊 Verification Summary:")
    print("=" * 30)
    for title, passed, total in summary:
        print(f"  {'✅' if passed == total else '❌'} {title}: {passed}/{total}")

    if all(passed == total for _, passed, total in summary):
        print("🎉 All checks passed! Ready to run experiments.")
        return 0
    print("🔧 Fix the issues above before running experiments.")
    return 1


if __name__ == "__main__":
    sys.exit(main())
