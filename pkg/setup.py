#!/usr/bin/env python
# License: MIT

from setuptools import setup

def readme():
    with open('README.md') as f:
        return f.read()

def requirements():
    req_path = 'requirements.txt'
    with open(req_path) as f:
        reqs = f.read().splitlines()
    return reqs


setup(name='corpusforge',
      version='0.1.0',
      description=('Builds interleaved image-text and image-caption \
                    corpora for Indian languages from web archive (WARC) \
                    files.'),
      long_description=readme(),
      keywords='warc common crawl multimodal corpus indic',
      license='MIT',
      packages=['corpusforge'],
      package_data={'corpusforge': ['data/*.txt', 'data/*.cfg',
                                    'data/stopwords/*.txt',
                                    'data/nsfw/*.txt',
                                    'data/boilerplate/*.txt']},
      entry_points={'console_scripts': ['forge = corpusforge.forge:main']},
      extras_require={'fasttext': ['fasttext>=0.9.2'],
                      'test': ['pytest>=7', 'hypothesis>=6']},
      install_requires=requirements())
