from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide settings, read from ISOPLATE_* environment variables or .env"""

    model_config = SettingsConfigDict(
        env_prefix="ISOPLATE_",
        env_file=".env",
        extra="ignore",
        case_sensitive=True,
    )

    PROJECT_NAME: str = "isoplate"

    # Output
    OUTPUT_DIR: str = "results"
    CSV_SIGNIFICANT_DIGITS: int = 17

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False

    # Dense linear algebra is fine up to roughly a 12x12 quadratic mesh
    DENSE_DOF_WARNING: int = 1500

    # Batch runs
    MAX_WORKERS: int = 4


settings = Settings()
