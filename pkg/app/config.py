"""
Application Configuration using Pydantic Settings
"""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Application
    APP_NAME: str = "Two-Step BFT Consensus Simulator"
    APP_VERSION: str = "1.0.0"

    # Runs
    OUTPUT_DIR: str = "runs"  # traces and verdicts of `run` land here

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")


settings = Settings()
