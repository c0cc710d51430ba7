#!/usr/bin/env python3

import pytest
from hypothesis import given, settings, strategies as st

from corpusforge.dom_refine import (DEFAULT_PLACEHOLDER, PruneRules,
                                    default_rules, essential_text,
                                    measure_reduction, prune,
                                    reduction_stats)
from corpusforge.dom_tree import DomNode, parse_html, text_content


def _body(tree):
    return [c for c in tree.children if c.tag == 'body'][0]


def test_prune_normalizes_text_and_breaks():
    tree = parse_html('<html><body><p>Hello  <b>world</b><br><br><br>'
                      'next<!-- note --></p></body></html>')
    pruned = prune(tree)
    p = _body(pruned).children[0]
    assert p.tag == 'p'
    assert [(c.tag, c.text) for c in p.children] == \
        [('#text', 'Hello world'), ('br', ''), ('br', ''), ('#text', 'next')]
    assert prune(pruned) == pruned


def test_source_newlines_are_not_line_breaks():
    tree = parse_html('<p>राम ने आज बाजार में <b>ताजे</b>\n<i>फल</i>\n\n'
                      'लिए</p>')
    p = _body(prune(tree)).children[0]
    assert [(c.tag, c.text) for c in p.children] == \
        [('#text', 'राम ने आज बाजार में ताजे फल लिए')]


def test_prune_removes_boilerplate():
    tree = parse_html(
        '<html><body>'
        '<nav><a href="/">होम</a></nav>'
        '<div class="Main-Menu">मेनू</div>'
        '<div id="site-footer-links">नीचे</div>'
        '<script>var a = 1;</script>'
        '<article><p>असली <span>खबर</span> यहां है</p>'
        '<p><a class="more-link" href="/more">और पढ़ें</a></p></article>'
        '</body></html>')
    pruned = prune(tree)

    tags = set(n.tag for n in pruned.iter_nodes())
    assert not tags & {'nav', 'script', 'span', 'a'}
    text = text_content(pruned)
    assert 'असली खबर यहां है' in text
    assert DEFAULT_PLACEHOLDER in text
    for removed in ('होम', 'मेनू', 'नीचे', 'और पढ़ें'):
        assert removed not in text
    # The input tree is not modified.
    assert 'होम' in text_content(tree)


def test_prune_root_removed():
    rules = default_rules()
    tree = DomNode('nav', {}, [DomNode.text_node('menu')])
    assert prune(tree, rules) == DomNode('html')


def test_rules_validation(tmp_path):
    with pytest.raises(ValueError):
        PruneRules(['p', 'nav'], ['nav'], [], [])
    with pytest.raises(ValueError):
        PruneRules(['p'], [], [], ['br'])

    path = tmp_path / 'rules.txt'
    path.write_text('# custom\nALLOW: p\nBLOCK: nav\nBLOCK_SUBSTRING: promo'
                    '\nUNWRAP: b\n', encoding='utf-8')
    rules = PruneRules.load(str(path))
    assert rules.structural_allowlist == {'p'}
    assert rules.is_blocked(DomNode('div', {'class': 'top PROMO-box'}))
    assert not rules.is_blocked(DomNode('div', {'class': 'menu'}))

    path.write_text('ALLOW: p\nDROP: nav\n', encoding='utf-8')
    with pytest.raises(ValueError):
        PruneRules.load(str(path))


def test_reduction_stats():
    assert reduction_stats(1000, 'ab c', 100, 'abc') == \
        {'size_ratio': 0.1, 'text_retention': 1.0}
    assert reduction_stats(100, 'aabb', 50, 'ab') == \
        {'size_ratio': 0.5, 'text_retention': 0.5}
    assert reduction_stats(10, '', 5, '')['text_retention'] == 1.0
    with pytest.raises(ValueError):
        reduction_stats(0, 'a', 0, 'a')


def _boilerplate_heavy_page():
    menu = ''.join('<li><a href="/section/{0}">खंड {0}</a></li>'.format(i)
                   for i in range(60))
    script = 'window.dataLayer = window.dataLayer || [];' * 120
    style = '.nav-item { color: #333; margin: 0 4px; }' * 80
    return ('<html><head><style>{}</style><script>{}</script></head><body>'
            '<header><nav><ul>{}</ul></nav></header>'
            '<div class="sidebar-widgets"><ul>{}</ul></div>'
            '<article><h1>राज्य में नई बस सेवा शुरू</h1>'
            '<p>परिवहन विभाग ने आज से बीस नए मार्गों पर बसें चलाने की'
            ' घोषणा की।</p><p>यात्रियों को <b>कम किराए</b> में सुविधा'
            ' मिलेगी।</p></article>'
            '<footer><p>सर्वाधिकार सुरक्षित</p>{}</footer>'
            '<script>{}</script></body></html>').format(
                style, script, menu, menu, menu, script)


def test_boilerplate_heavy_reduction():
    payload = _boilerplate_heavy_page().encode('utf-8')
    stats = measure_reduction(payload)
    assert stats['size_ratio'] <= 0.2
    assert stats['text_retention'] == 1.0


def test_essential_text_ignores_blocked():
    tree = parse_html('<html><body><p>रखें</p><nav><p>हटाएं</p></nav>'
                      '</body></html>')
    assert essential_text(tree) == 'रखें'


TAGS = ['div', 'p', 'section', 'article', 'span', 'a', 'b', 'em', 'nav',
        'footer', 'script', 'style', 'ul', 'li', 'br', 'img', 'figure',
        'figcaption', 'table', 'td', 'custom-widget']
CLASSES = ['', 'content', 'main-menu', 'Site-Footer', 'more-link',
           'sidebar-left', 'story']


def _element(tag, class_name, children):
    attributes = {'class': class_name} if class_name else {}
    return DomNode(tag, attributes, children)


leaves = st.one_of(
    st.text(alphabet='ab क\n\t', max_size=8).map(DomNode.text_node),
    st.text(alphabet='xy', max_size=3).map(DomNode.comment_node))

trees = st.recursive(
    leaves,
    lambda children: st.builds(_element, st.sampled_from(TAGS),
                               st.sampled_from(CLASSES),
                               st.lists(children, max_size=5)),
    max_leaves=40)

roots = st.builds(_element, st.sampled_from(TAGS), st.sampled_from(CLASSES),
                  st.lists(trees, max_size=6))


@settings(max_examples=1000, deadline=None)
@given(roots)
def test_prune_properties(tree):
    rules = default_rules()
    once = prune(tree, rules)
    assert prune(once, rules) == once

    for node in once.iter_nodes():
        assert not node.is_comment()
        if node.is_text():
            continue
        assert not rules.is_blocked(node)
        assert node.tag not in rules.unwrap_tags
        if node.tag == 'br':
            assert not node.children and not node.attributes

    for parent in once.iter_nodes():
        for a, b in zip(parent.children, parent.children[1:]):
            assert not (a.is_text() and b.is_text())
        for child in parent.children:
            if child.is_text():
                assert child.text and '\n' not in child.text
