from pydantic_settings import BaseSettings
import os
from dotenv import load_dotenv

load_dotenv()

class Settings(BaseSettings):
    app_env: str = os.getenv("APP_ENV", "development")
    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    schema_version: str = os.getenv("FANO_SCHEMA", "fano-cqed/1")

    # moment integration
    ode_method: str = os.getenv("FANO_ODE_METHOD", "Radau")
    ode_rtol: float = float(os.getenv("FANO_ODE_RTOL", "1e-10"))
    ode_atol: float = float(os.getenv("FANO_ODE_ATOL", "1e-20"))
    horizon_factor: float = float(os.getenv("FANO_HORIZON_FACTOR", "10"))
    tail_tolerance: float = float(os.getenv("FANO_TAIL_TOLERANCE", "1e-4"))

    # room-temperature regression report
    regime_multiplier: float = float(os.getenv("FANO_REGIME_MULTIPLIER", "1e3"))
    regress_threshold: float = float(os.getenv("FANO_REGRESS_THRESHOLD", "1e-3"))

    # fitting
    fit_max_iter: int = int(os.getenv("FANO_FIT_MAX_ITER", "2000"))
    fit_tolerance: float = float(os.getenv("FANO_FIT_TOLERANCE", "1e-10"))
    background_degree: int = int(os.getenv("FANO_BACKGROUND_DEGREE", "3"))
    threads: int = int(os.getenv("FANO_THREADS", "1"))

    float_format: str = os.getenv("FANO_FLOAT_FORMAT", "%.12g")

    class Config:
        env_file = ".env"

settings = Settings()
