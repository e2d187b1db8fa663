"""
外部接口层
"""
