"""
Setup script for gensense-lab - Compressive sensing with generative priors: bounds, ReLU constructions and experiments
"""

from setuptools import setup, find_packages
import os

# Read README file
readme_path = os.path.join(os.path.dirname(__file__), 'README.md')
try:
    with open(readme_path, 'r', encoding='utf-8') as f:
        long_description = f.read()
except FileNotFoundError:
    long_description = "Compressive sensing with generative priors: bounds, ReLU constructions and experiments"

# Read requirements
requirements_path = os.path.join(os.path.dirname(__file__), 'requirements.txt')
try:
    with open(requirements_path, 'r', encoding='utf-8') as f:
        requirements = [line.strip() for line in f if line.strip() and not line.startswith('#')]
except FileNotFoundError:
    requirements = [
        'python-dotenv>=1.0.0',
        'scikit-learn>=1.3.0',
        'numpy>=1.24.0',
        'matplotlib>=3.8.0',
    ]

setup(
    name="gensense-lab",
    version="1.0.0",
    description="Compressive sensing with generative priors: bounds, ReLU constructions and experiments",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    py_modules=['app', 'main'],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.10",
    install_requires=requirements,
    extras_require={
        'dev': [
            'pytest>=7.0.0',
            'pytest-cov>=4.0.0',
        ],
    },
    entry_points={
        'console_scripts': [
            'gensense=main:main',
        ],
    },
    data_files=[
        ('config', ['.env.example']),
    ],
    keywords="compressive sensing generative models relu networks minimax bounds",
    license="MIT",
    zip_safe=False,
)
