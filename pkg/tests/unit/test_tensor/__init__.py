"""张量与自动微分单元测试"""
