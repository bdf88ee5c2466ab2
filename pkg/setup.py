import setuptools

setuptools.setup(
    name='qgrad',
    version='0.1.0',
    description='Quantized gradient methods: direction sets, covering analysis, bounds and dual decomposition experiments',
    packages=setuptools.find_packages(exclude=['docs', 'examples', 'examples.*']),
    classifiers=[
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Intended Audience :: Science/Research',
    ],
    platforms=['any'],
    python_requires='>=3.9',
    install_requires=[
        'numpy',
        'pandas',
        'pytest',
        'scipy',
        'setuptools',
        'statsmodels',
    ],
    entry_points={
        'console_scripts': ['qgrad=qgrad.cli.app:main'],
    },
)
