from .registry import register_all
