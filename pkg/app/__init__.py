# Calibration Forge - 标定几何数值工具包
