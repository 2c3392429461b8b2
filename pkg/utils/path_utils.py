"""
 utils/path_utils.py
Path utilities for run outputs and the shipped schema/config resources
"""


import os


class PathResolver:
    """Resolves repository resources and user-supplied output locations"""

    @staticmethod
    def get_base_path():
        """Repository root (the directory holding main.py)"""
        return os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

    @staticmethod
    def resource_path(relative_path):
        """Absolute path of a shipped resource such as data/schemas/adult.json"""
        return os.path.join(PathResolver.get_base_path(), relative_path)

    @staticmethod
    def get_writable_path(relative_path):
        """Output and log locations are taken relative to the working directory"""
        if os.path.isabs(relative_path):
            return relative_path
        return os.path.join(os.getcwd(), relative_path)

    @staticmethod
    def ensure_directory(path):
        os.makedirs(path, exist_ok=True)
        return path

    @staticmethod
    def sanitize_filename(filename):
        """Replace characters that break report file names on some platforms"""
        for char in '<>:"/\\|?* ':
            filename = filename.replace(char, '_')
        return filename
