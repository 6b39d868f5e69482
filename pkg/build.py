"""One-command build script: python build.py"""
import os
import subprocess
import sys

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    print("Building qcrsim executable ...")
    result = subprocess.run(
        [
            sys.executable, '-m', 'PyInstaller', 'cli.py',
            '--name', 'qcrsim',
            '--noconfirm',
            '--add-data', f"config{os.pathsep}config",
            '--hidden-import', 'scipy.special._cdflib',
        ],
        cwd=HERE,
    )
    if result.returncode == 0:
        print("\nBuild complete!  ->  dist/qcrsim/qcrsim")
    else:
        print("\nBuild failed. Check the output above for errors.")
    sys.exit(result.returncode)


if __name__ == '__main__':
    main()
