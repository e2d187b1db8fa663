"""监控观测"""
