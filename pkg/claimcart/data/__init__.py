"""Claims datasets, CSV ingestion and simulated portfolios"""

from claimcart.data.dataset import Dataset, load_csv, save_csv, stratified_split
from claimcart.data.simulate import ScenarioConfig, sample_zip, simulate_scenario

__all__ = [
    "Dataset",
    "load_csv",
    "save_csv",
    "stratified_split",
    "ScenarioConfig",
    "simulate_scenario",
    "sample_zip",
]
