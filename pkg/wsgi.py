import os

from popcone import create_app

# gunicorn serves `wsgi:application`
application = create_app()

# Local development server: `python wsgi.py`, port from PORT
if __name__ == "__main__":
    application.run(port=int(os.getenv('PORT', '5000')), debug=os.getenv('POPCONE_DEBUG') == '1')
