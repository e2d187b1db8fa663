"""命令行单元测试"""
