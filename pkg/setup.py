from setuptools import setup, find_packages

# 项目根目录本身作为 slc3dmm 包安装，子包之间按顶层名绝对导入（见根 __init__.py）
package_name = "slc3dmm"

setup(
    name=package_name,
    version="0.1.0",
    description="稀疏局部一致 3D 人脸形变模型：学习、非刚性拟合、标注迁移与评价",
    packages=[package_name] + [f"{package_name}.{pkg}" for pkg in find_packages(exclude=["tests", "tests.*", "docs", "examples", "examples.*"])],
    package_dir={package_name: "."},
    package_data={package_name: ["config.yaml"]},
    python_requires=">=3.10",
    install_requires=[
        "pandas>=1.5.0",
        "numpy>=1.22.0",
        "scipy>=1.8.0",
        "pyyaml>=5.4.0",
        "numba>=0.56.0",
        "joblib>=1.1.0",
    ],
    extras_require={
        "test": ["pytest>=7.0"],
    },
    entry_points={
        "console_scripts": ["slc-batch=slc3dmm.slc_batch:main"],
    },
)
