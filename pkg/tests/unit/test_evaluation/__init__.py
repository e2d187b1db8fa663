"""评估单元测试"""
