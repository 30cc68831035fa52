from setuptools import setup, find_packages


def main():
    setup(
        name="hxseg",
        description='Two-branch hyperspectral and auxiliary-modality '
                    'semantic segmentation',
        packages=find_packages(),
        install_requires=['h5py', 'joblib', 'numpy>=1.7.0', 'pandas',
                          'Pillow', 'scipy'],
        entry_points={
            'console_scripts': ['hxseg = hxseg.scripts.cli:main'],
        },
    )

if __name__ == '__main__':
    main()
