import copy
import logging
import os

import yaml

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    'coverage': {
        'granularity': 'line',
        'strip_prefix': None,
        'map_size': 65536,
    },
    'report': {
        'strict_universe': True,
        'max_units_per_pair': 10000,
        'precision': 2,
    },
    'analysis': {
        'seed': 0,
        'repeats': 50,
    },
    'guidance': {
        'policy': 'mcg',
        'granularity': 'branch',
        'budget': 2000,
        'plateau_limit': 20,
        'radius': None,
    },
}


class Config:
    """MC ツールキット設定ファイル管理クラス"""

    def __init__(self, config_path=None):
        self.config_path = config_path or os.environ.get("MC_CONFIG") or "config.yaml"
        self.explicit = self.config_path != "config.yaml"
        self.config_data = None
        self.load_config()

    def load_config(self):
        """設定ファイルを読み込み（欠けたキーはデフォルトで補う）"""
        self.config_data = self.get_default_config()
        try:
            if os.path.exists(self.config_path):
                with open(self.config_path, 'r', encoding='utf-8') as f:
                    loaded = yaml.safe_load(f) or {}
                if not isinstance(loaded, dict):
                    raise ValueError("top level must be a mapping")
                self._merge(self.config_data, loaded)
                logger.debug("Config loaded from %s", self.config_path)
            elif self.explicit:
                logger.warning("Config file %s not found, using defaults", self.config_path)
            else:
                logger.debug("Config file %s not found, using defaults", self.config_path)
        except (OSError, yaml.YAMLError, ValueError) as e:
            logger.warning("Error loading config %s: %s, using defaults", self.config_path, e)
            self.config_data = self.get_default_config()

    @staticmethod
    def _merge(base, override):
        for key, value in override.items():
            if isinstance(value, dict) and isinstance(base.get(key), dict):
                Config._merge(base[key], value)
            else:
                base[key] = value

    def get_default_config(self):
        """デフォルト設定を返す"""
        return copy.deepcopy(DEFAULT_CONFIG)

    def get(self, section, key):
        """指定キーの値を取得"""
        try:
            return self.config_data[section][key]
        except (KeyError, TypeError):
            logger.warning("config key %s.%s not found, using default", section, key)
            return DEFAULT_CONFIG[section][key]


# グローバル設定インスタンス
config = Config()
