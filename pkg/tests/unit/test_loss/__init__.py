"""损失函数单元测试"""
