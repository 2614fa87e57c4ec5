import json
import logging
import os
import sqlite3

import pandas as pd

import config

logger = logging.getLogger(__name__)


def get_db_connection(db_path=None):
    """
    Create a connection to the SQLite results database.
    Returns a connection object.
    """
    db_path = db_path or config.RESULTS_DB_PATH
    # Create the data directory if it doesn't exist
    directory = os.path.dirname(db_path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    conn = sqlite3.connect(db_path)
    conn.row_factory = sqlite3.Row
    return conn


def init_db(db_path=None):
    """
    Initialize the database tables if they don't exist.
    """
    conn = get_db_connection(db_path)
    cursor = conn.cursor()

    # One row per table run, successful or not
    cursor.execute('''
    CREATE TABLE IF NOT EXISTS runs (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        preset TEXT NOT NULL,
        system TEXT NOT NULL,
        h REAL NOT NULL,
        r REAL,
        status TEXT NOT NULL,
        message TEXT,
        h_over_r REAL,
        cfl_max REAL,
        q27 REAL,
        q28 REAL,
        q29 REAL,
        peak_v REAL,
        steps INTEGER,
        r_mode TEXT,
        restarts INTEGER,
        report JSON,
        created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
    )
    ''')

    cursor.execute('''
    CREATE TABLE IF NOT EXISTS residuals (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        preset TEXT NOT NULL,
        h REAL NOT NULL,
        psi_id TEXT NOT NULL,
        I_u REAL NOT NULL,
        I_v REAL NOT NULL,
        test_function JSON,
        created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
    )
    ''')

    conn.commit()
    conn.close()


def record_run(preset, system, row, db_path=None):
    """
    Store one table row as returned by experiments.run_table.
    """
    init_db(db_path)
    conn = get_db_connection(db_path)
    cursor = conn.cursor()

    if row.get("success"):
        report = row["report"]
        cursor.execute('''
        INSERT INTO runs (preset, system, h, r, status, message, h_over_r, cfl_max, q27, q28, q29,
                          peak_v, steps, r_mode, restarts, report)
        VALUES (?, ?, ?, ?, 'completed', NULL, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', (preset, system, report.h, report.r, report.h_over_r, report.cfl_max, report.q27, report.q28,
              report.q29, report.peak_v, report.steps, report.r_mode, report.restarts,
              json.dumps(report.to_dict())))
    else:
        cursor.execute('''
        INSERT INTO runs (preset, system, h, r, status, message)
        VALUES (?, ?, ?, ?, 'failed', ?)
        ''', (preset, system, row["h"], row.get("r"), row.get("message", "")))

    conn.commit()
    conn.close()
    return True


def record_residuals(preset, report, db_path=None):
    init_db(db_path)
    conn = get_db_connection(db_path)
    cursor = conn.cursor()

    for (h, psi_id), (I_u, I_v) in report.entries.items():
        psi = next((p for p in report.test_functions.get(h, []) if p['psi_id'] == psi_id), None)
        cursor.execute('''
        INSERT INTO residuals (preset, h, psi_id, I_u, I_v, test_function)
        VALUES (?, ?, ?, ?, ?, ?)
        ''', (preset, h, psi_id, I_u, I_v, json.dumps(psi) if psi else None))

    conn.commit()
    conn.close()
    return len(report.entries)


def get_runs(preset=None, db_path=None):
    """
    Stored runs as a DataFrame, newest last, optionally for one preset.
    """
    init_db(db_path)
    conn = get_db_connection(db_path)

    query = '''
    SELECT id, preset, system, h, r, status, message, h_over_r, cfl_max, q27, q28, q29, peak_v, steps,
           r_mode, restarts, created_at
    FROM runs
    '''
    params = ()
    if preset is not None:
        query += ' WHERE preset = ?'
        params = (preset,)
    query += ' ORDER BY id'

    runs = pd.read_sql_query(query, conn, params=params)
    conn.close()
    return runs


def get_residuals(preset=None, db_path=None):
    init_db(db_path)
    conn = get_db_connection(db_path)

    query = 'SELECT id, preset, h, psi_id, I_u, I_v, created_at FROM residuals'
    params = ()
    if preset is not None:
        query += ' WHERE preset = ?'
        params = (preset,)
    query += ' ORDER BY id'

    residuals = pd.read_sql_query(query, conn, params=params)
    conn.close()
    return residuals


def get_db_stats(db_path=None):
    init_db(db_path)
    conn = get_db_connection(db_path)
    cursor = conn.cursor()

    cursor.execute('SELECT COUNT(*) as count FROM runs')
    runs_count = cursor.fetchone()['count']

    cursor.execute("SELECT COUNT(*) as count FROM runs WHERE status = 'failed'")
    failed_count = cursor.fetchone()['count']

    cursor.execute('SELECT COUNT(*) as count FROM residuals')
    residuals_count = cursor.fetchone()['count']

    conn.close()

    return {
        "runs_count": runs_count,
        "failed_runs_count": failed_count,
        "residuals_count": residuals_count
    }
