"""Checks on the package metadata in setup.cfg."""

import configparser
import os
import unittest

SETUP_CFG = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "setup.cfg")


class TestSetupCfg(unittest.TestCase):
    def setUp(self):
        self.parser = configparser.ConfigParser()
        self.assertEqual(self.parser.read(SETUP_CFG), [SETUP_CFG])

    def test_readme_is_the_description(self):
        metadata = self.parser["metadata"]
        self.assertEqual(metadata["description_file"], "README.md")
        self.assertTrue(os.path.exists(os.path.join(os.path.dirname(SETUP_CFG), metadata["description_file"])))

    def test_metadata_keys_are_known(self):
        known = {"name", "description_file", "long_description_content_type", "summary", "author",
                 "author_email", "url", "project_urls", "download_url", "keywords", "classifier"}
        self.assertEqual(set(self.parser["metadata"]) - known, set())


if __name__ == '__main__':
    unittest.main()
