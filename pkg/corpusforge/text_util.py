# License: MIT

'''
The word tokenizer shared by the filters, the caption extractor and the
corpus statistics.  Tokens are maximal runs of non-whitespace characters
(Unicode whitespace), which keeps word counts language-neutral.
'''

import unicodedata


WHITESPACE_TOKENIZER = 'whitespace'


def tokenize(text):
    return text.split()


def count_words(text):
    return len(text.split())


def normalize_whitespace(text):
    return ' '.join(text.split())


def strip_punctuation(token):
    '''
    Remove leading and trailing punctuation (any Unicode "P*" category,
    which includes the danda) from a token.
    '''
    start = 0
    end = len(token)
    while start < end and unicodedata.category(token[start]).startswith('P'):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith('P'):
        end -= 1
    return token[start:end]


def normalize_token(token):
    return strip_punctuation(token).lower()
