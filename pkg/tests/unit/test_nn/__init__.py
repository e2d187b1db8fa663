"""网络层与主干单元测试"""
