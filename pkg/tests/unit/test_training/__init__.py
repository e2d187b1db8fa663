"""优化器与训练循环单元测试"""
