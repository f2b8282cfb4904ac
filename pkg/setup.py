from setuptools import setup

setup(
    pbr=True,
    name='pyIHS',
    version='0.0.1',
    description='Python package for learning intersections of halfspaces with a margin.',
    author='Christian Porschen',
    author_email='christian.porschen@ukmuenster.de',
    packages=['pyIHS', 'pyIHS.data', 'pyIHS.harness'],
    package_data={'pyIHS': ['presets.json']},
    install_requires=[
        'colorlog>=6.7.0',
        'numpy>=1.25.2',
        'pandas>=2.0.3',
        'scipy>=1.11.0',
        'python-dotenv>=1.0.0',

    ],
    entry_points={
        'console_scripts': ['pyihs=pyIHS.harness.cli:main'],
    },
)
