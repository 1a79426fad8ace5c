# core/config.py
from pathlib import Path
from pydantic_settings import BaseSettings, SettingsConfigDict
import os


def get_default_threads() -> int:
    env_threads = os.getenv("LANE_EMDEN_THREADS")
    if env_threads and env_threads.isdigit() and int(env_threads) > 0:
        return int(env_threads)
    return 1


class Config(BaseSettings):
    # workspace
    workspace_root: Path = Path(__file__).parent.parent / "work"
    output_dir: Path = workspace_root / "out"

    # logs
    log_level: str = "INFO"
    log_dir: Path = workspace_root / "logs"
    log_filename: str = "lane-emden.log"
    log_console: bool = True

    # data parallelism
    threads: int = get_default_threads()

    # solver defaults
    tol_fix: float = 1e-10
    tol_lin: float = 1e-12
    tol_res: float = 1e-8
    max_outer: int = 500
    damping: float = 0.8
    continuation_step: float = 0.1
    eigen_tol: float = 1e-12

    # geometry / verification defaults
    curvature_tolerance: float = 1e-6
    epsilon_def_scale: float = 1e-8
    n_boundary: int = 256

    # model config
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="LANE_EMDEN_",
        extra="ignore",
    )

    @property
    def log_path(self) -> Path:
        return self.log_dir / self.log_filename

    def ensure_exists(self) -> None:
        try:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except (OSError, IOError) as e:
            raise RuntimeError(f"Failed to initialize workspace: {e}")

CONFIG = Config()
CONFIG.ensure_exists()
