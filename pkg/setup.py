from setuptools import setup, find_packages

setup(
    name='wblab',
    version='1.0.0',
    description='A Jax-based laboratory of well-balanced and spectral solvers for balance laws, '
                'kinetic boundary layers and water waves.',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    packages=find_packages(exclude=['tests', 'examples*']),
    install_requires=[
        'flax',
        'jax',
        'jaxlib',
        'einops',
        'numpy',
        'scipy',
    ],
    entry_points={
        'console_scripts': [
            'wblab=wblab.__src.lab.cli:main',
        ],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Intended Audience :: Education',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Topic :: Scientific/Engineering :: Physics',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
    ],
    keywords='jax well-balanced godunov spectral water waves serre kinetic euler-poisson',
    python_requires='>=3.9',
)
