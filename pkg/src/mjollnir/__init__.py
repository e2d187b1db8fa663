"""
Mjöllnir - 全球闪电密度深度学习参数化
"""

__version__ = "0.1.0"
