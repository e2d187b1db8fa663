"""配置单元测试"""
