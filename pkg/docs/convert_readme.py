# convert_readme.py
"""
builds docs/README.html from README.md, with a table of the shipped
scenarios generated from scenarios/*.json
"""
import json
from pathlib import Path

import markdown
from bs4 import BeautifulSoup

DOCS = Path(__file__).parent
SCENARIOS = DOCS.parent / 'scenarios'

CSS = """
li.checkbox { list-style-type: none; }
table { border-collapse: collapse; }
td, th { border: 1px solid #999; padding: 2px 8px; }
"""

COLUMNS = ['scenario', 'object', 'n', 't', 'fault model', 'faults', 'command']

def describe_faults(faults):
    parts = []
    for c in faults.get('crashes', []):
        if 'broadcast_sn' in c:
            parts.append('p{0} crashes in broadcast {1}'.format(c['process'], c['broadcast_sn']))
        else:
            parts.append('p{0} crashes after {1} events'.format(c['process'], c.get('after_events', 0)))
    for (pid, b) in sorted(faults.get('byzantine', {}).items()):
        strategy = b['strategy'] if isinstance(b, dict) else b
        parts.append('p{0} {1}'.format(pid, strategy))
    return ', '.join(parts) or 'none'

def scenario_rows():
    for path in sorted(SCENARIOS.glob('*.json')):
        s = json.loads(path.read_text())
        obj = s.get('object', {}).get('name', '?')
        yield [path.stem, obj, s.get('n'), s.get('t', 0), s.get('fault_model', 'crash'),
            describe_faults(s.get('faults', {})), 'demo-ws' if obj == 'wsd' else 'run']

def scenario_table(soup):
    table = soup.new_tag('table')
    head = soup.new_tag('tr')
    for name in COLUMNS:
        th = soup.new_tag('th')
        th.string = name
        head.append(th)
    table.append(head)
    for row in scenario_rows():
        tr = soup.new_tag('tr')
        for value in row:
            td = soup.new_tag('td')
            td.string = str(value)
            tr.append(td)
        table.append(tr)
    return table

def style_checkboxes(soup):
    for li in soup.find_all('li'):
        text = li.get_text()
        if text.startswith('[X]') or text.startswith('[ ]'):
            li['class'] = 'checkbox'

def convert(mdfile=DOCS / 'README.md', htmlfile=DOCS / 'README.html'):
    html = markdown.markdown(mdfile.read_text(), extensions=['tables', 'fenced_code'])
    soup = BeautifulSoup(html, 'html.parser')
    style_checkboxes(soup)

    # the generated table goes right after the scenario file section
    anchor = soup.find(lambda tag: tag.name == 'h3' and tag.get_text() == 'Scenario files')
    if anchor is not None:
        heading = soup.new_tag('h4')
        heading.string = 'Shipped scenarios'
        anchor.insert_after(heading)
        heading.insert_after(scenario_table(soup))

    style = soup.new_tag('style', type='text/css')
    style.string = CSS
    soup.insert(0, style)
    htmlfile.write_text(soup.prettify())
    return htmlfile

if __name__ == '__main__':
    print('Wrote {}.'.format(convert()))
