from dotenv import load_dotenv
import os

load_dotenv()

GRID_CONFIG = {
    "x_min": float(os.getenv("LAB_GRID_X_MIN", -10.0)),
    "x_max": float(os.getenv("LAB_GRID_X_MAX", 10.0)),
    "step": float(os.getenv("LAB_GRID_STEP", 1.0 / 256.0)),
    "holder_slack": float(os.getenv("LAB_HOLDER_SLACK", 1.05)),
}

SOLVER_CONFIG = {
    "tol": float(os.getenv("LAB_SOLVER_TOL", 1e-10)),
    "max_iter": int(os.getenv("LAB_SOLVER_MAX_ITER", 2000)),
    "leak_tolerance": float(os.getenv("LAB_LEAK_TOLERANCE", 1e-6)),
    "near_contraction_warning": float(os.getenv("LAB_RHO_WARNING", 0.99)),
    "minorization_slack": float(os.getenv("LAB_MINORIZATION_SLACK", 0.05)),
    "shift_scan_points": int(os.getenv("LAB_SHIFT_SCAN_POINTS", 65)),
}

COUPLING_CONFIG = {
    "dt_factor": float(os.getenv("LAB_DT_FACTOR", 1e-3)),
    "bisection_levels": int(os.getenv("LAB_BISECTION_LEVELS", 8)),
    "score_atoms": int(os.getenv("LAB_SCORE_ATOMS", 4096)),
    "pilot_reps": int(os.getenv("LAB_PILOT_REPS", 50)),
    "pilot_mode": os.getenv("LAB_PILOT_MODE", "simulate"),
    "horizon_c": float(os.getenv("LAB_HORIZON_C", 0.25)),
    "calibration_quantile": float(os.getenv("LAB_CALIBRATION_QUANTILE", 0.995)),
    "j_star_cap": int(os.getenv("LAB_J_STAR_CAP", 8)),
    "cross_check_tol": float(os.getenv("LAB_CROSS_CHECK_TOL", 1e-8)),
}

MC_CONFIG = {
    "master_seed": int(os.getenv("LAB_SEED", 20060801)),
    "workers": int(os.getenv("LAB_WORKERS", 1)),
    "conditioning_draws": int(os.getenv("LAB_CONDITIONING_DRAWS", 30)),
    "se_multiplier": float(os.getenv("LAB_SE_MULTIPLIER", 3.0)),
    "show_progress": os.getenv("LAB_SHOW_PROGRESS", "true").lower() == "true",
}

OUTPUT_CONFIG = {
    "out_dir": os.getenv("LAB_OUT_DIR", "results"),
    "experiment_config_file": os.getenv("LAB_EXPERIMENT_CONFIGS", "config/experiment_configs.json"),
    "results_csv": "results.csv",
    "journal_file": "journal.jsonl",
}

LOG_CONFIG = {
    "log_dir": os.getenv("LAB_LOG_DIR", "logs"),
    "level": os.getenv("LAB_LOG_LEVEL", "INFO").upper(),
    "max_bytes": int(os.getenv("LAB_LOG_MAX_BYTES", 10 * 1024 * 1024)),
    "backup_count": int(os.getenv("LAB_LOG_BACKUPS", 5)),
}
