from gmr.configs.config import Config

__version__ = Config().version
