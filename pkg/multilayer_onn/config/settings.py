# multilayer_onn/config/settings.py
# Purpose: Manage process-level settings and environment variables

"""
Settings module for loading configuration from environment variables.
"""

import os
from typing import Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Settings:
    """
    Process-level settings loaded from environment variables.

    These are the lowest-precedence layer; YAML run configs and CLI flags override them.
    """

    def __init__(self) -> None:
        """
        Initialize settings with default values from environment variables.
        """
        self.log_level: str = os.getenv('ONN_LOG_LEVEL', 'INFO')
        self.json_logs: bool = os.getenv('ONN_JSON_LOGS', 'true').lower() == 'true'
        self.data_dir: str = os.getenv('ONN_DATA_DIR', 'data/mnist')
        self.output_dir: str = os.getenv('ONN_OUTPUT_DIR', 'runs')
        self.seed: int = int(os.getenv('ONN_SEED', '0'))
        self.threads: int = int(os.getenv('ONN_THREADS', str(os.cpu_count() or 1)))
        self.max_grid: int = int(os.getenv('ONN_MAX_GRID', '4096'))

    def mnist_paths(self, split: str = "train") -> Optional[tuple]:
        """
        Locate the IDX image/label files for a split inside data_dir.

        Args:
            split (str): 'train' or 't10k'.

        Returns:
            Optional[tuple]: (images_path, labels_path) if both files exist, else None.
        """
        images = os.path.join(self.data_dir, f"{split}-images-idx3-ubyte")
        labels = os.path.join(self.data_dir, f"{split}-labels-idx1-ubyte")
        if os.path.exists(images) and os.path.exists(labels):
            return images, labels
        return None
