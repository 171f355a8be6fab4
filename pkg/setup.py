from setuptools import setup, find_packages

setup(
    name='fingerdict',
    version='0.1.0',
    packages=find_packages(where='src'),
    package_dir={'': 'src'},
    python_requires='>=3.8',
    install_requires=[],
    extras_require={
        'dev': [
            'pytest',
            'pytest-asyncio',
            'hypothesis',
        ],
    },
    entry_points={
        'console_scripts': [
            'fingerdict=fingerdict.main:main',
        ],
    },
    author='Your Name',
    description='Finger-search dictionaries with worst-case bounds, a probe-counting benchmark and a differential tester.',
    url='',
    classifiers=[
        'Programming Language :: Python :: 3',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
    ],
)
