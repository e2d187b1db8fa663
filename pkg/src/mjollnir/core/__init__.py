"""
核心模块：张量、网络、损失、训练、数据、评估与配置
"""
