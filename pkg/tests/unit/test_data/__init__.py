"""数据流水线单元测试"""
